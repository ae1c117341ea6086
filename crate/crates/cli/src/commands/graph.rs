use linfa_core::completion::{factor_graph, factor_positions, partial_correlation_graph};
use linfa_core::factor_variable_correlations;
use serde_json::json;

use super::{check_dimension, read_params, LAMBDA_FILE, PSI_FILE};
use crate::args::{GraphArgs, GraphKindArg};
use crate::csvio::{create_dir, fmt_f64, read_matrix, CsvOut};
use crate::error::{CliError, CliResult};
use crate::manifest::ManifestBuilder;

pub const EDGES_FILE: &str = "edges.csv";
pub const POSITIONS_FILE: &str = "factor_positions.csv";

/// Writes the strongest edges with 1-based endpoints: variable pairs for
/// partial-correlation graphs, (variable, factor) for factor graphs.
pub fn run(args: &GraphArgs) -> CliResult<()> {
    let mut manifest = ManifestBuilder::new("graph", serde_json::to_value(args).unwrap_or_default(), None);
    let (_, params) = read_params(&args.params_dir)?;
    manifest.inputs(&[args.params_dir.join(LAMBDA_FILE), args.params_dir.join(PSI_FILE)])?;
    let (d, q) = (params.d(), params.q());
    let budget = match args.kind {
        GraphKindArg::Partial => d * (d - 1) / 2,
        GraphKindArg::Factor => d * q,
    };
    let top = if args.top > budget {
        log::warn!("--top {} exceeds the {budget} available edges; keeping all of them", args.top);
        budget
    } else {
        args.top
    };
    let graph = match args.kind {
        GraphKindArg::Partial => partial_correlation_graph(&params, top)?,
        GraphKindArg::Factor => factor_graph(&params, top)?,
    };
    if graph.is_empty_graph() {
        log::warn!("every edge weight is zero");
    }

    create_dir(&args.out_dir)?;
    let mut out = CsvOut::create(&args.out_dir.join(EDGES_FILE))?;
    out.row(["a", "b", "weight"])?;
    for e in &graph.edges {
        out.row([(e.a + 1).to_string(), (e.b + 1).to_string(), fmt_f64(e.weight)])?;
    }
    out.finish()?;
    manifest.output(EDGES_FILE);

    if let Some(coords_path) = &args.coords {
        if args.kind == GraphKindArg::Partial {
            log::warn!("--coords only applies to factor graphs; ignored");
        } else {
            let (header, coords) = read_matrix(coords_path)?;
            check_dimension("coordinates", d, coords.nrows())?;
            if coords.ncols() == 0 {
                return Err(CliError::Input("coordinates need at least one column".into()));
            }
            manifest.inputs(std::slice::from_ref(coords_path))?;
            let positions = factor_positions(&factor_variable_correlations(&params), &coords)?;
            let mut out = CsvOut::create(&args.out_dir.join(POSITIONS_FILE))?;
            out.row(std::iter::once("factor".to_string()).chain(header))?;
            for j in 0..q {
                out.row(std::iter::once((j + 1).to_string()).chain(positions.row(j).iter().map(|&v| fmt_f64(v))))?;
            }
            out.finish()?;
            manifest.output(POSITIONS_FILE);
        }
    }
    manifest
        .details(json!({ "edges": graph.edges.len(), "available": budget }))
        .write(&args.out_dir)
}
