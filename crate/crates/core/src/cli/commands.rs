use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::Instant;

use serde_json::{json, Map, Value};

use super::{
    manifest, AnalyzeArgs, BenchArgs, EvaluateArgs, ExtractArgs, GenerateArgs, GridArgs, LabelArgs, Outputs,
    PadLayout, PerturbArgs, PredictArgs, TrainArgs,
};
use crate::dataset::{
    self, extract_features, feature_scan, normalize_with, r2_score, read_dataset_csv, write_dataset_csv,
    write_normalizer_csv, Dataset, DatasetError, ExtractOptions, GoldenWidths, Normalizer, PerturbMode,
    PerturbationSpec, Sample,
};
use crate::error::{Error, Result};
use crate::floorplan::Floorplan;
use crate::metrics::{
    self, error_histogram, ir_map, peak_memory_mib, timing_report, write_histogram_csv, write_pgm,
    write_raster_csv, write_scatter_csv, Aggregation, EvalReport, MetricsError, Timing,
};
use crate::netlist::{
    corner_pads, format_value, generate_synthetic, parse_netlist, ring_pads, write_netlist, PowerGridNetlist,
    SyntheticGrid, SyntheticGridSpec,
};
use crate::neuralnet::{
    self, node_drop_estimate, predict_ir_drop, read_model_json, write_history_csv, write_model_json, IrPrediction,
    MlpConfig, MlpModel, NeuralError, PredictOptions, TrainConfig,
};
use crate::reliability::{allocate_block_currents, write_reliability_csv, PgLine, SizingParams};
use crate::solver::{self, ir_drop, kcl_check, read_solution, write_solution, AnalyzeOptions, GridSolution};

type Summary = Map<String, Value>;

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::file(path, e))
}

fn read_netlist(path: &Path) -> Result<PowerGridNetlist> {
    Ok(parse_netlist(open(path)?)?)
}

fn read_floorplan(path: &Path) -> Result<Floorplan> {
    Ok(Floorplan::from_json(open(path)?)?)
}

fn read_model(path: &Path) -> Result<MlpModel> {
    Ok(read_model_json(open(path)?)?)
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    Ok(read_dataset_csv(open(path)?, &path.display().to_string())?)
}

fn load_solution(path: &Path, netlist: &PowerGridNetlist) -> Result<GridSolution> {
    let file = read_solution(open(path)?)?;
    Ok(GridSolution::from_voltages(netlist, file.voltages_for(netlist)?))
}

fn grid_spec(g: &GridArgs) -> SyntheticGridSpec {
    SyntheticGridSpec {
        rows: g.rows,
        cols: g.cols,
        pitch: g.pitch,
        sheet_resistance: g.rho,
        base_width: g.base_width,
        core_width: g.core_width,
        ir_budget: g.ir_budget,
        pad_positions: match g.pads {
            PadLayout::Corner if g.rows > 0 && g.cols > 0 => corner_pads(g.rows, g.cols),
            PadLayout::Ring if g.rows > 0 && g.cols > 0 => ring_pads(g.rows, g.cols),
            _ => Vec::new(),
        },
        blocks: Vec::new(),
        random_blocks: g.blocks,
        block_current: g.block_current,
        vdd: g.vdd,
        seed: g.seed,
    }
}

fn positive(what: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Usage(format!("--{what} must be positive, got {v}")))
    }
}

fn write_widths_csv(grid: &SyntheticGrid, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "resistor,line,width")?;
    for ((r, w), line) in grid
        .netlist
        .resistors()
        .iter()
        .zip(&grid.widths.resistor_widths)
        .zip(&grid.widths.resistor_lines)
    {
        writeln!(out, "{},{},{}", r.name, line, format_value(*w))?;
    }
    Ok(())
}

/// Widths per resistor of `netlist` from a `resistor,line,width` file.
fn read_widths_csv(path: &Path, netlist: &PowerGridNetlist) -> Result<Vec<f64>> {
    let bad = |line: usize, reason: String| Error::Dataset(DatasetError::MalformedCsv { line, reason });
    let mut lines = open(path)?.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == "resistor,line,width" => {}
        _ => return Err(bad(1, "expected header `resistor,line,width`".into())),
    }
    let mut by_name = HashMap::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::file(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(bad(i + 2, format!("expected 3 fields, got {}", fields.len())));
        }
        let w: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| bad(i + 2, format!("`{}` is not a number", fields[2])))?;
        by_name.insert(fields[0].trim().to_ascii_lowercase(), w);
    }
    netlist
        .resistors()
        .iter()
        .map(|r| {
            by_name
                .get(&r.name.to_ascii_lowercase())
                .copied()
                .ok_or_else(|| bad(0, format!("no width for resistor `{}`", r.name)))
        })
        .collect()
}

fn golden(labels: &LabelArgs, netlist: &PowerGridNetlist) -> Result<Option<GoldenWidths>> {
    match (&labels.widths, labels.rho) {
        (Some(path), _) => Ok(Some(GoldenWidths::PerResistor(read_widths_csv(path, netlist)?))),
        (None, Some(rho)) => {
            positive("rho", rho)?;
            Ok(Some(GoldenWidths::FromResistance { rho }))
        }
        (None, None) => Ok(None),
    }
}

fn labels_inputs(labels: &LabelArgs) -> Vec<&Path> {
    labels.widths.iter().chain(&labels.floorplan).map(|p| p.as_path()).collect()
}

fn write_map(out: &mut Outputs, drops: &[f64], netlist: &PowerGridNetlist, res: usize, agg: Aggregation) -> Result<()> {
    match ir_map(drops, netlist, res, agg) {
        Ok(map) => {
            out.write("irmap.pgm", |w| Ok(write_pgm(&map, w)?))?;
            out.write("irmap.csv", |w| Ok(write_raster_csv(&map, w)?))
        }
        Err(MetricsError::NoCoordinates(node)) => {
            log::warn!("no IR map: node `{node}` has no layout coordinates");
            Ok(())
        }
        Err(e) => Err(e.into()),
    }
}

pub(super) fn generate(a: &GenerateArgs, argv: &[String]) -> Result<Summary> {
    if let Some(j) = a.j_max {
        positive("j-max", j)?;
    }
    let spec = grid_spec(&a.grid);
    let grid = generate_synthetic(&spec)?;
    let mut out = Outputs::new(&a.out_dir)?;
    out.write("grid.sp", |w| Ok(write_netlist(&grid.netlist, w)?))?;
    out.write("widths.csv", |w| write_widths_csv(&grid, w))?;
    out.json("floorplan.json", &grid.floorplan)?;
    out.json("spec.json", &spec)?;
    if let Some(j) = a.j_max {
        out.write("reliability.csv", |w| Ok(write_reliability_csv(&grid.floorplan.lines, j, w)?))?;
    }
    manifest(&mut out, "generate", argv, a, &[])?;
    let c = grid.netlist.counts();
    Ok(Map::from_iter([
        ("nodes".into(), json!(c.nodes)),
        ("resistors".into(), json!(c.resistors)),
        ("pads".into(), json!(c.pads)),
        ("loads".into(), json!(c.loads)),
        ("lines".into(), json!(grid.floorplan.lines.len())),
    ]))
}

pub(super) fn analyze(a: &AnalyzeArgs, argv: &[String]) -> Result<Summary> {
    let netlist = read_netlist(&a.netlist)?;
    let opts = AnalyzeOptions {
        tol: a.tol,
        max_iter: a.max_iter,
    };
    let sol = solver::analyze(&netlist, &opts)?;
    let ir = ir_drop(&sol, &netlist);
    let kcl = kcl_check(&netlist, &sol);
    let worst_node = ir.worst_node.map(|id| netlist.node(id).name.clone());
    let mut out = Outputs::new(&a.out_dir)?;
    out.write("solution.txt", |w| Ok(write_solution(&netlist, &sol, w)?))?;
    let report = json!({
        "worst_case": ir.worst_case,
        "worst_node": worst_node,
        "iterations": sol.stats.iterations,
        "relative_residual": sol.stats.relative_residual,
        "kcl_max_abs": kcl.max_abs,
    });
    out.json("analysis.json", &report)?;
    let agg = if a.mean { Aggregation::Mean } else { Aggregation::Max };
    write_map(&mut out, &ir.drops, &netlist, a.resolution, agg)?;
    manifest(&mut out, "analyze", argv, a, &[&a.netlist])?;
    let mut summary: Summary = report.as_object().cloned().unwrap_or_default();
    summary.insert("wall_time".into(), json!(sol.stats.wall_time));
    Ok(summary)
}

fn scan_summary(data: &Dataset) -> Value {
    match feature_scan(data) {
        Ok(s) => json!(s),
        Err(e) => {
            log::warn!("feature scan skipped: {e}");
            Value::Null
        }
    }
}

pub(super) fn extract(a: &ExtractArgs, argv: &[String]) -> Result<Summary> {
    let netlist = read_netlist(&a.netlist)?;
    let sol = load_solution(&a.solution, &netlist)?;
    let widths = golden(&a.labels, &netlist)?
        .ok_or_else(|| Error::Usage("extract needs --widths or --rho for the width labels".into()))?;
    let floorplan = a.labels.floorplan.as_deref().map(read_floorplan).transpose()?;
    let opts = ExtractOptions {
        floorplan: floorplan.as_ref(),
        skip_uncoordinated: a.labels.skip_uncoordinated,
    };
    let data = extract_features(&netlist, &sol, &widths, &opts)?;
    let norm = Normalizer::fit(&data.samples)?;
    let scan = scan_summary(&data);
    let mut out = Outputs::new(&a.out_dir)?;
    out.write("dataset.csv", |w| Ok(write_dataset_csv(&data, w)?))?;
    out.write("normalizer.csv", |w| Ok(write_normalizer_csv(&norm, w)?))?;
    out.json("scan.json", &scan)?;
    let mut inputs = vec![a.netlist.as_path(), a.solution.as_path()];
    inputs.extend(labels_inputs(&a.labels));
    manifest(&mut out, "extract", argv, a, &inputs)?;
    Ok(Map::from_iter([
        ("samples".into(), json!(data.len())),
        ("scan".into(), scan),
    ]))
}

pub(super) fn perturb(a: &PerturbArgs, argv: &[String]) -> Result<Summary> {
    let netlist = read_netlist(&a.netlist)?;
    let spec = PerturbationSpec {
        gamma: a.gamma,
        seed: a.seed,
        targets: a.targets.clone(),
        mode: a.mode.into(),
    };
    spec.validate()?;
    // labels belong to the unperturbed design
    let labels = golden(&a.labels, &netlist)?
        .map(|g| g.resolve(&netlist))
        .transpose()?
        .map(GoldenWidths::PerResistor);
    let (perturbed, sol) = match spec.mode {
        PerturbMode::Resolve => {
            let p = dataset::perturb(&netlist, &spec)?;
            let opts = AnalyzeOptions {
                tol: a.tol,
                max_iter: None,
            };
            let sol = solver::analyze(&p, &opts)?;
            (p, sol)
        }
        PerturbMode::InPlace => {
            let path = a
                .solution
                .as_ref()
                .ok_or_else(|| Error::Usage("--mode in-place needs --solution".into()))?;
            let base = load_solution(path, &netlist)?;
            dataset::perturb_in_place(&netlist, &base, &spec)?
        }
    };
    let mut out = Outputs::new(&a.out_dir)?;
    out.write("perturbed.sp", |w| Ok(write_netlist(&perturbed, w)?))?;
    out.write("solution.txt", |w| Ok(write_solution(&perturbed, &sol, w)?))?;
    let mut summary = Map::from_iter([("worst_case".into(), json!(ir_drop(&sol, &perturbed).worst_case))]);
    if let Some(widths) = labels {
        let floorplan = a.labels.floorplan.as_deref().map(read_floorplan).transpose()?;
        let opts = ExtractOptions {
            floorplan: floorplan.as_ref(),
            skip_uncoordinated: a.labels.skip_uncoordinated,
        };
        let data = extract_features(&perturbed, &sol, &widths, &opts)?;
        out.write("dataset.csv", |w| Ok(write_dataset_csv(&data, w)?))?;
        summary.insert("samples".into(), json!(data.len()));
    }
    let mut inputs = vec![a.netlist.as_path()];
    inputs.extend(a.solution.as_deref());
    inputs.extend(labels_inputs(&a.labels));
    manifest(&mut out, "perturb", argv, a, &inputs)?;
    Ok(summary)
}

pub(super) fn train(a: &TrainArgs, argv: &[String]) -> Result<Summary> {
    positive("j-max", a.j_max)?;
    let data = read_dataset(&a.dataset)?;
    let mlp = MlpConfig {
        hidden_layers: a.hidden_layers,
        hidden_width: a.hidden_width,
        seed: a.seed,
        ..Default::default()
    };
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.learning_rate,
        lambda: a.lambda,
        j_max: a.j_max,
        shuffle_seed: a.seed,
        patience: (a.patience > 0).then_some(a.patience),
        validation_fraction: a.validation_fraction,
        ..Default::default()
    };
    if data.is_empty() {
        return Err(NeuralError::EmptyDataset.into());
    }
    let norm = Normalizer::fit(&data.samples)?;
    for f in norm.constant_features() {
        log::warn!("feature `{f}` is constant in the training set");
    }
    let outcome = match &a.val_dataset {
        Some(path) => {
            let val = read_dataset(path)?;
            neuralnet::train_with_validation(&data, Some(&val), &mlp, &cfg)?
        }
        None => neuralnet::train(&data, &mlp, &cfg)?,
    };
    let mut out = Outputs::new(&a.out_dir)?;
    out.write("model.json", |w| {
        write_model_json(&outcome.model, &mut *w)?;
        writeln!(w)?;
        Ok(())
    })?;
    out.write("history.csv", |w| Ok(write_history_csv(&outcome.history, w)?))?;
    if let Some(n) = &outcome.model.normalizer {
        out.write("normalizer.csv", |w| Ok(write_normalizer_csv(n, w)?))?;
    }
    let mut inputs = vec![a.dataset.as_path()];
    inputs.extend(a.val_dataset.as_deref());
    manifest(&mut out, "train", argv, a, &inputs)?;
    let last = outcome.history.last();
    Ok(Map::from_iter([
        ("parameters".into(), json!(outcome.model.parameter_count())),
        ("epochs_run".into(), json!(outcome.history.len())),
        ("best_epoch".into(), json!(outcome.best_epoch)),
        ("train_loss".into(), json!(last.map(|r| r.train_loss))),
        ("val_loss".into(), json!(last.and_then(|r| r.val_loss))),
    ]))
}

fn write_line_widths(lines: &[PgLine], p: &IrPrediction, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "line_index,orientation,position,width,current,resistance,drop,em_violated")?;
    for (k, l) in lines.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            l.index,
            l.orientation,
            format_value(l.position),
            format_value(p.widths[k]),
            format_value(p.currents[k]),
            format_value(p.resistances[k]),
            format_value(p.drops[k]),
            p.em[k].violated
        )?;
    }
    Ok(())
}

pub(super) fn predict(a: &PredictArgs, argv: &[String]) -> Result<Summary> {
    positive("j-max", a.j_max)?;
    let model = read_model(&a.model)?;
    let fp = read_floorplan(&a.floorplan)?;
    let netlist = a.netlist.as_deref().map(read_netlist).transpose()?;
    let blocks = match &netlist {
        Some(n) => fp.blocks_from(n),
        None => fp.blocks.clone(),
    };
    let sizing = SizingParams {
        rho: a.rho.unwrap_or(fp.sheet_resistance),
        j_max: a.j_max,
        ir_budget: a.ir_budget.unwrap_or(fp.ir_budget),
        core_width: a.core_width.unwrap_or(fp.core_width),
    };
    let p = predict_ir_drop(&model, &blocks, &sizing, &fp.lines, &PredictOptions { w_min: a.w_min })?;
    let sized: Vec<PgLine> = fp
        .lines
        .iter()
        .enumerate()
        .map(|(k, l)| PgLine {
            width: p.widths[k],
            current: p.currents[k],
            spacing_after: p.spacings.as_ref().map_or(l.spacing_after, |s| s[k]),
            ..l.clone()
        })
        .collect();
    let mut out = Outputs::new(&a.out_dir)?;
    out.write("widths.csv", |w| write_line_widths(&fp.lines, &p, w))?;
    out.json("prediction.json", &p)?;
    out.write("reliability.csv", |w| Ok(write_reliability_csv(&sized, a.j_max, w)?))?;
    let mut summary = Map::from_iter([
        ("worst_case_line".into(), json!(p.worst_case)),
        ("worst_line".into(), json!(p.worst_line)),
        ("line_count".into(), json!(p.line_count)),
        ("em_violations".into(), json!(p.em_violations)),
        ("clamped".into(), json!(p.clamped)),
    ]);
    if let Some(n) = &netlist {
        let drops = node_drop_estimate(n, &fp.lines, &blocks, &p, sizing.rho);
        out.write("node_drops.csv", |w| {
            writeln!(w, "node,drop")?;
            for node in n.nodes().iter().filter(|v| !v.is_ground) {
                writeln!(w, "{},{}", node.name, format_value(drops[node.id]))?;
            }
            Ok(())
        })?;
        write_map(&mut out, &drops, n, a.resolution, Aggregation::Max)?;
        summary.insert("worst_case_node".into(), json!(drops.iter().copied().fold(0.0, f64::max)));
    }
    let mut inputs = vec![a.model.as_path(), a.floorplan.as_path()];
    inputs.extend(a.netlist.as_deref());
    manifest(&mut out, "predict", argv, a, &inputs)?;
    Ok(summary)
}

pub(super) fn evaluate(a: &EvaluateArgs, argv: &[String]) -> Result<Summary> {
    let model = read_model(&a.model)?;
    let norm = model
        .normalizer
        .ok_or_else(|| NeuralError::InvalidConfig("model has no normalizer".into()))?;
    let raw = read_dataset(&a.dataset)?;
    if raw.is_empty() {
        return Err(DatasetError::EmptyDataset.into());
    }
    let test = normalize_with(&raw, &norm);
    let x = ndarray::Array2::from_shape_fn((test.len(), 3), |(i, k)| test.samples[i].features()[k]);
    let pred_norm: Vec<f64> = model.forward_batch(x.view())?.column(0).to_vec();
    let golden_norm = test.targets();
    let golden = raw.targets();
    let pred: Vec<f64> = pred_norm.iter().map(|&v| norm.denormalize_width(v)).collect();

    let conventional = match (&a.solution, &a.netlist) {
        (Some(s), Some(n)) => {
            let netlist = read_netlist(n)?;
            Some(ir_drop(&load_solution(s, &netlist)?, &netlist).worst_case)
        }
        _ => None,
    };
    let predicted = a
        .prediction
        .as_deref()
        .map(|p| -> Result<f64> { Ok(serde_json::from_reader::<_, IrPrediction>(open(p)?)?.worst_case) })
        .transpose()?;
    let timing = a
        .timing
        .as_deref()
        .map(|p| -> Result<Timing> { Ok(serde_json::from_reader(open(p)?)?) })
        .transpose()?;
    let report = EvalReport {
        mse: metrics::mse(&golden, &pred)?,
        mse_normalized: Some(metrics::mse(&golden_norm, &pred_norm)?),
        r2: r2_score(&golden, &pred)?,
        worst_case_ir_conventional: conventional,
        worst_case_ir_predicted: predicted,
        histogram: error_histogram(&golden_norm, &pred_norm, a.bins)?,
        timing,
        peak_memory_mib: if a.report_memory { peak_memory_mib() } else { None },
    };
    let mut out = Outputs::new(&a.out_dir)?;
    out.json("report.json", &report)?;
    out.write("scatter.csv", |w| Ok(write_scatter_csv(&golden, &pred, w)?))?;
    out.write("histogram.csv", |w| Ok(write_histogram_csv(&report.histogram, w)?))?;
    let mut inputs = vec![a.model.as_path(), a.dataset.as_path()];
    inputs.extend(a.solution.iter().chain(&a.netlist).chain(&a.prediction).chain(&a.timing).map(|p| p.as_path()));
    manifest(&mut out, "evaluate", argv, a, &inputs)?;
    Ok(Map::from_iter([
        ("samples".into(), json!(test.len())),
        ("mse".into(), json!(report.mse)),
        ("mse_normalized".into(), json!(report.mse_normalized)),
        ("r2".into(), json!(report.r2)),
    ]))
}

/// Untrained default network whose scaling covers `grid`'s line features.
fn scaled_default_model(grid: &SyntheticGrid) -> Result<MlpModel> {
    let lines = &grid.floorplan.lines;
    let alloc = allocate_block_currents(lines, &grid.floorplan.blocks)?;
    let samples: Vec<Sample> = neuralnet::line_features(lines, &alloc.line_currents)
        .iter()
        .zip(&grid.widths.line_widths)
        .map(|(f, &w)| Sample {
            x: f[0],
            y: f[1],
            i_d: f[2],
            w,
        })
        .collect();
    let mut model = neuralnet::init(&MlpConfig::default())?;
    model.normalizer = Some(Normalizer::fit(&samples)?);
    Ok(model)
}

pub(super) fn bench(a: &BenchArgs, argv: &[String]) -> Result<Summary> {
    positive("j-max", a.j_max)?;
    if a.repeats == 0 {
        return Err(Error::Usage("--repeats must be at least 1".into()));
    }
    let grid = generate_synthetic(&grid_spec(&a.grid))?;
    let unknowns = solver::assemble(&grid.netlist)?.dim();

    let t = Instant::now();
    let sol = solver::analyze(&grid.netlist, &AnalyzeOptions::default())?;
    let conventional_worst = ir_drop(&sol, &grid.netlist).worst_case;
    let conventional = t.elapsed().as_secs_f64();

    let model = match &a.model {
        Some(p) => read_model(p)?,
        None => scaled_default_model(&grid)?,
    };
    let fp = &grid.floorplan;
    let sizing = SizingParams {
        rho: fp.sheet_resistance,
        j_max: a.j_max,
        ir_budget: fp.ir_budget,
        core_width: fp.core_width,
    };
    let mut dl = f64::INFINITY;
    let mut predicted_worst = 0.0;
    for _ in 0..a.repeats {
        let t = Instant::now();
        let blocks = fp.blocks_from(&grid.netlist);
        let p = predict_ir_drop(&model, &blocks, &sizing, &fp.lines, &PredictOptions::default())?;
        let drops = node_drop_estimate(&grid.netlist, &fp.lines, &blocks, &p, sizing.rho);
        predicted_worst = drops.iter().copied().fold(0.0, f64::max);
        dl = dl.min(t.elapsed().as_secs_f64());
    }
    let timing = timing_report(conventional, dl.max(metrics::TIMING_FLOOR))?;
    let mut out = Outputs::new(&a.out_dir)?;
    out.json("timing.json", &timing)?;
    let details = json!({
        "unknowns": unknowns,
        "iterations": sol.stats.iterations,
        "conventional_seconds": timing.conventional_seconds,
        "dl_seconds": timing.dl_seconds,
        "speedup": timing.speedup,
        "worst_case_conventional": conventional_worst,
        "worst_case_predicted": predicted_worst,
        "peak_memory_mib": peak_memory_mib(),
    });
    out.json("bench.json", &details)?;
    let inputs: Vec<&Path> = a.model.iter().map(|p| p.as_path()).collect();
    manifest(&mut out, "bench", argv, a, &inputs)?;
    Ok(details.as_object().cloned().unwrap_or_default())
}
