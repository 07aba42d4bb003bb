//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Pass criterion numbers as arguments to run a subset.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use pgplan::dataset::{
    extract_features, feature_scan, normalize, normalize_with, perturb, r2_score, Dataset, ExtractOptions,
    GoldenWidths, PerturbationSpec,
};
use pgplan::metrics::{error_histogram, ir_map, mse, pearson, Aggregation, DEFAULT_BINS};
use pgplan::netlist::{generate_synthetic, ring_pads, SyntheticGrid, SyntheticGridSpec};
use pgplan::neuralnet::{
    backward, init, node_drop_estimate, predict_ir_drop, train, Batch, Layer, MlpConfig, MlpModel, TrainConfig,
};
use pgplan::reliability::{em_check, width_for_ir, SizingParams};
use pgplan::solver::{analyze, assemble, dense_solve_oracle, ir_drop, kcl_check, AnalyzeOptions, GridSolution};

type Check = Result<String, String>;

const RHO: f64 = 0.05;
const J_MAX: f64 = 1.0;

fn ensure(cond: bool, detail: String) -> Check {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn solve(grid: &SyntheticGrid) -> GridSolution {
    analyze(&grid.netlist, &AnalyzeOptions::default()).expect("synthetic grids solve")
}

fn sizing(grid: &SyntheticGrid) -> SizingParams {
    SizingParams {
        rho: grid.floorplan.sheet_resistance,
        j_max: J_MAX,
        ir_budget: grid.floorplan.ir_budget,
        core_width: grid.floorplan.core_width,
    }
}

fn dataset_of(grid: &SyntheticGrid, netlist: &pgplan::PowerGridNetlist, solution: &GridSolution) -> Dataset {
    let opts = ExtractOptions {
        floorplan: Some(&grid.floorplan),
        skip_uncoordinated: false,
    };
    extract_features(netlist, solution, &GoldenWidths::FromResistance { rho: RHO }, &opts).expect("extraction")
}

/// The shared learning run: one synthetic design, a model trained on it and
/// its γ = 10% perturbed test set.
struct Run {
    grid: SyntheticGrid,
    solution: GridSolution,
    train: Dataset,
    model: MlpModel,
    seconds: f64,
}

impl Run {
    fn test_set(&self, gamma: f64, seed: u64) -> Dataset {
        let spec = PerturbationSpec {
            gamma,
            seed,
            ..Default::default()
        };
        let netlist = perturb(&self.grid.netlist, &spec).expect("perturbation");
        let solution = analyze(&netlist, &AnalyzeOptions::default()).expect("perturbed grid solves");
        let raw = dataset_of(&self.grid, &netlist, &solution);
        normalize_with(&raw, self.train.normalizer.as_ref().expect("normalized"))
    }

    /// `(golden, predicted)` normalized widths.
    fn predict(&self, test: &Dataset) -> (Vec<f64>, Vec<f64>) {
        let x = ndarray::Array2::from_shape_fn((test.len(), 3), |(i, k)| test.samples[i].features()[k]);
        let out = self.model.forward_batch(x.view()).expect("features lie in the guard band");
        (test.targets(), out.column(0).to_vec())
    }
}

fn learning_spec() -> SyntheticGridSpec {
    let n = 101;
    SyntheticGridSpec {
        pad_positions: ring_pads(n, n),
        random_blocks: 60,
        block_current: 0.05,
        seed: 11,
        ..SyntheticGridSpec::square(n)
    }
}

fn run() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| {
        let t = Instant::now();
        let grid = generate_synthetic(&learning_spec()).expect("generator");
        let solution = solve(&grid);
        let train_set = normalize(&dataset_of(&grid, &grid.netlist, &solution)).expect("normalizer");
        let cfg = TrainConfig {
            epochs: 60,
            j_max: J_MAX,
            shuffle_seed: 1,
            ..Default::default()
        };
        let outcome = train(&train_set, &MlpConfig::default(), &cfg).expect("training");
        Run {
            grid,
            solution,
            train: train_set,
            model: outcome.model,
            seconds: t.elapsed().as_secs_f64(),
        }
    })
}

fn c1_solver_oracle() -> Check {
    let t = Instant::now();
    let mut worst_v = 0.0f64;
    let mut worst_kcl = 0.0f64;
    let mut dims = (usize::MAX, 0);
    for seed in 0..25u64 {
        let n = 8 + seed as usize * 36 / 24;
        let spec = SyntheticGridSpec {
            random_blocks: 3 + seed as usize % 5,
            seed,
            ..SyntheticGridSpec::square(n)
        };
        let grid = generate_synthetic(&spec).map_err(|e| e.to_string())?;
        let sys = assemble(&grid.netlist).map_err(|e| e.to_string())?;
        dims = (dims.0.min(sys.dim()), dims.1.max(sys.dim()));
        let cg = solve(&grid);
        let dense = dense_solve_oracle(&sys).map_err(|e| e.to_string())?;
        for (a, b) in cg.voltages.iter().zip(&dense.voltages) {
            worst_v = worst_v.max((a - b).abs());
        }
        worst_kcl = worst_kcl.max(kcl_check(&grid.netlist, &cg).max_abs);
    }
    let secs = t.elapsed().as_secs_f64();
    ensure(
        worst_v <= 1e-9 && worst_kcl <= 1e-8 && secs < 30.0 && dims.0 >= 50 && dims.1 <= 2000,
        format!(
            "unknowns {}..{}, max |dv| {worst_v:.2e} V, max KCL {worst_kcl:.2e} A, {secs:.1} s",
            dims.0, dims.1
        ),
    )
}

fn c2_width_consistency() -> Check {
    let spec = SyntheticGridSpec {
        random_blocks: 12,
        seed: 5,
        ..SyntheticGridSpec::square(40)
    };
    let grid = generate_synthetic(&spec).map_err(|e| e.to_string())?;
    let sol = solve(&grid);
    let exact = extract_features(
        &grid.netlist,
        &sol,
        &GoldenWidths::PerResistor(grid.widths.resistor_widths.clone()),
        &ExtractOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let bitwise = exact.targets() == grid.widths.resistor_widths;
    let derived = dataset_of(&grid, &grid.netlist, &sol);
    let from_r = derived
        .targets()
        .iter()
        .zip(&grid.widths.resistor_widths)
        .map(|(a, b)| (a - b).abs() / b)
        .fold(0.0, f64::max);
    let mut identity = 0.0f64;
    for line in grid.floorplan.lines.iter().filter(|l| l.current > 0.0) {
        let w = width_for_ir(RHO, line.length, line.current, spec.ir_budget).map_err(|e| e.to_string())?;
        let em = em_check(line.current, w, J_MAX).map_err(|e| e.to_string())?;
        let drop = em.density * RHO * line.length;
        identity = identity.max((drop - spec.ir_budget).abs() / spec.ir_budget);
        identity = identity.max((em.density - line.current / w).abs() / em.density);
    }
    ensure(
        bitwise && from_r <= 1e-12 && identity <= 1e-12,
        format!("per-resistor exact: {bitwise}, from resistance {from_r:.1e}, round trip {identity:.1e}"),
    )
}

fn flat_mut(model: &mut MlpModel) -> Vec<&mut f64> {
    model
        .layers
        .iter_mut()
        .flat_map(|l: &mut Layer| l.weights.iter_mut().chain(l.biases.iter_mut()))
        .collect()
}

fn c3_gradient_check() -> Check {
    let t = Instant::now();
    let cfg = TrainConfig {
        lambda: 0.5,
        j_max: 1e-3,
        ..Default::default()
    };
    let mut model = init(&MlpConfig {
        hidden_layers: 2,
        hidden_width: 6,
        seed: 9,
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let samples: Vec<pgplan::dataset::Sample> = (0..16)
        .map(|i| {
            let f = i as f64 / 15.0;
            pgplan::dataset::Sample {
                x: f,
                y: (3.7 * f + 0.3) % 1.0,
                i_d: 2e-3 * ((5.3 * f + 0.6) % 1.0),
                w: 0.5 + 2.5 * ((1.9 * f + 0.2) % 1.0),
            }
        })
        .collect();
    let data = normalize(&Dataset::new(samples, "toy")).map_err(|e| e.to_string())?;
    let norm = data.normalizer;
    let idx: Vec<usize> = (0..data.len()).collect();
    let batch = Batch::from_dataset(&data, &idx);
    let (_, grads) = backward(&model, &batch, norm.as_ref(), &cfg).map_err(|e| e.to_string())?;
    let analytic: Vec<f64> = grads
        .layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied().collect::<Vec<_>>())
        .collect();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for k in 0..analytic.len() {
        let orig = *flat_mut(&mut model)[k];
        let at = |v: f64, m: &mut MlpModel| {
            *flat_mut(m)[k] = v;
            backward(m, &batch, norm.as_ref(), &cfg).expect("toy batch").0.total
        };
        let up = at(orig + h, &mut model);
        let down = at(orig - h, &mut model);
        *flat_mut(&mut model)[k] = orig;
        let numeric = (up - down) / (2.0 * h);
        worst = worst.max((analytic[k] - numeric).abs() / (analytic[k].abs() + 1e-8));
    }
    let secs = t.elapsed().as_secs_f64();
    ensure(
        worst <= 1e-4 && secs < 5.0,
        format!("{} parameters, max relative error {worst:.2e}, {secs:.2} s", analytic.len()),
    )
}

fn c4_learning_quality() -> Check {
    let r = run();
    let test = r.test_set(0.10, 1);
    let (golden, pred) = r.predict(&test);
    let r2 = r2_score(&golden, &pred).map_err(|e| e.to_string())?;
    let nmse = mse(&golden, &pred).map_err(|e| e.to_string())?;
    ensure(
        r.train.len() >= 20_000 && r2 >= 0.90 && nmse <= 0.05 && r.seconds < 300.0,
        format!(
            "{} training samples, test r² {r2:.4}, normalized MSE {nmse:.5}, setup {:.0} s",
            r.train.len(),
            r.seconds
        ),
    )
}

fn c5_feature_scan() -> Check {
    let s = feature_scan(&run().train).map_err(|e| e.to_string())?;
    ensure(
        s.combined > s.x && s.combined > s.y && s.combined > s.i_d && s.i_d > s.x && s.i_d > s.y,
        format!("r² x {:.3}, y {:.3}, I_d {:.3}, combined {:.3}", s.x, s.y, s.i_d, s.combined),
    )
}

fn c6_perturbation_trend() -> Check {
    let r = run();
    let gammas = [0.05, 0.10, 0.20, 0.30];
    let means: Vec<f64> = gammas
        .iter()
        .map(|&g| {
            (0..5u64)
                .map(|seed| {
                    let (golden, pred) = r.predict(&r.test_set(g, 100 + seed));
                    mse(&golden, &pred).expect("non-empty")
                })
                .sum::<f64>()
                / 5.0
        })
        .collect();
    let monotone = means.windows(2).all(|w| w[1] >= w[0]);
    let text: Vec<String> = gammas.iter().zip(&means).map(|(g, m)| format!("γ {g}: {m:.5}")).collect();
    ensure(monotone && means[3] > means[0], text.join(", "))
}

fn bench_grid(n: usize) -> (usize, f64, f64) {
    let spec = SyntheticGridSpec {
        pad_positions: ring_pads(n, n),
        random_blocks: 40,
        seed: 21,
        ..SyntheticGridSpec::square(n)
    };
    let grid = generate_synthetic(&spec).expect("generator");
    let unknowns = assemble(&grid.netlist).expect("assembly").dim();
    let t = Instant::now();
    let sol = solve(&grid);
    let _ = ir_drop(&sol, &grid.netlist);
    let conventional = t.elapsed().as_secs_f64();

    // inference cost does not depend on the weights; fit the scaling to this
    // grid's own line features so every query lies in the guard band
    let mut model = init(&MlpConfig::default()).expect("default config");
    let features = pgplan::neuralnet::line_features(&grid.floorplan.lines, &vec![0.0; grid.floorplan.lines.len()]);
    let alloc = pgplan::reliability::allocate_block_currents(&grid.floorplan.lines, &grid.floorplan.blocks)
        .expect("allocation");
    let samples: Vec<pgplan::dataset::Sample> = features
        .iter()
        .zip(&alloc.line_currents)
        .zip(&grid.widths.line_widths)
        .map(|((f, &i), &w)| pgplan::dataset::Sample { x: f[0], y: f[1], i_d: i, w })
        .collect();
    model.normalizer = Some(pgplan::dataset::Normalizer::fit(&samples).expect("non-empty"));
    let sizing = sizing(&grid);
    let mut dl = f64::INFINITY;
    for _ in 0..3 {
        let t = Instant::now();
        let blocks = grid.floorplan.blocks_from(&grid.netlist);
        let p = predict_ir_drop(&model, &blocks, &sizing, &grid.floorplan.lines, &Default::default())
            .expect("prediction");
        let d = node_drop_estimate(&grid.netlist, &grid.floorplan.lines, &blocks, &p, sizing.rho);
        std::hint::black_box(d);
        dl = dl.min(t.elapsed().as_secs_f64());
    }
    (unknowns, conventional, dl)
}

fn c7_speedup_trend() -> Check {
    let rows: Vec<(usize, f64, f64)> = [102, 318, 709].into_iter().map(bench_grid).collect();
    let speedups: Vec<f64> = rows.iter().map(|(_, c, d)| c / d.max(1e-6)).collect();
    let monotone = speedups.windows(2).all(|w| w[1] >= w[0]);
    let text: Vec<String> = rows
        .iter()
        .zip(&speedups)
        .map(|((n, c, d), s)| format!("{n}: {c:.3} s / {d:.4} s = {s:.1}×"))
        .collect();
    ensure(monotone && speedups.iter().all(|&s| s > 1.0) && speedups[1] >= 2.0, text.join(", "))
}

fn c8_error_concentration() -> Check {
    let r = run();
    let (golden, pred) = r.predict(&r.test_set(0.10, 1));
    let h = error_histogram(&golden, &pred, DEFAULT_BINS).map_err(|e| e.to_string())?;
    let m = h.modal_bin();
    let share = h.counts[m] as f64 / h.total() as f64;
    ensure(
        h.bin_contains(m, 0.0) && share >= 0.30,
        format!(
            "modal bin [{:.4}, {:.4}) holds {:.1}% of {} samples",
            h.edges[m],
            h.edges[m + 1],
            100.0 * share,
            h.total()
        ),
    )
}

fn c9_ir_map_fidelity() -> Check {
    let r = run();
    let netlist = &r.grid.netlist;
    let conventional = ir_drop(&r.solution, netlist).drops;
    let sizing = sizing(&r.grid);
    let blocks = r.grid.floorplan.blocks_from(netlist);
    let p = predict_ir_drop(&r.model, &blocks, &sizing, &r.grid.floorplan.lines, &Default::default())
        .map_err(|e| e.to_string())?;
    let predicted = node_drop_estimate(netlist, &r.grid.floorplan.lines, &blocks, &p, sizing.rho);
    let res = 25;
    let a = ir_map(&conventional, netlist, res, Aggregation::Max).map_err(|e| e.to_string())?;
    let b = ir_map(&predicted, netlist, res, Aggregation::Max).map_err(|e| e.to_string())?;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (u, v) in a.cells.iter().zip(&b.cells) {
        if let (Some(u), Some(v)) = (u, v) {
            xs.push(*u);
            ys.push(*v);
        }
    }
    let rho = pearson(&xs, &ys).map_err(|e| e.to_string())?;
    ensure(rho >= 0.9, format!("Pearson {rho:.4} over {} cells", xs.len()))
}

fn pipeline(dir: &Path) -> Result<(), String> {
    let bin = env!("CARGO_BIN_EXE_pgplan");
    // relative paths keep the manifests identical across directories
    let p = |name: &str| name.to_string();
    let steps: Vec<Vec<String>> = vec![
        vec!["generate", "--rows", "24", "--cols", "24", "--blocks", "6", "--seed", "7", "--out-dir", &p("grid")],
        vec!["analyze", "--netlist", &p("grid/grid.sp"), "--out-dir", &p("analysis")],
        vec![
            "extract",
            "--netlist",
            &p("grid/grid.sp"),
            "--solution",
            &p("analysis/solution.txt"),
            "--floorplan",
            &p("grid/floorplan.json"),
            "--widths",
            &p("grid/widths.csv"),
            "--out-dir",
            &p("train"),
        ],
        vec![
            "perturb",
            "--netlist",
            &p("grid/grid.sp"),
            "--floorplan",
            &p("grid/floorplan.json"),
            "--widths",
            &p("grid/widths.csv"),
            "--gamma",
            "0.1",
            "--seed",
            "3",
            "--out-dir",
            &p("test"),
        ],
        vec![
            "train",
            "--dataset",
            &p("train/dataset.csv"),
            "--epochs",
            "5",
            "--hidden-layers",
            "2",
            "--hidden-width",
            "16",
            "--j-max",
            "1",
            "--seed",
            "4",
            "--out-dir",
            &p("model"),
        ],
        vec![
            "predict",
            "--model",
            &p("model/model.json"),
            "--floorplan",
            &p("grid/floorplan.json"),
            "--netlist",
            &p("grid/grid.sp"),
            "--j-max",
            "1",
            "--out-dir",
            &p("predict"),
        ],
        vec![
            "evaluate",
            "--model",
            &p("model/model.json"),
            "--dataset",
            &p("test/dataset.csv"),
            "--out-dir",
            &p("eval"),
        ],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();
    for args in steps {
        let out = Command::new(bin).current_dir(dir).args(&args).output().map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("`{}` failed: {}", args[0], String::from_utf8_lossy(&out.stderr).trim()));
        }
    }
    Ok(())
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).expect("readable dir") {
            let path = entry.expect("entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path.strip_prefix(dir).expect("inside dir").to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn c10_determinism() -> Check {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    pipeline(a.path())?;
    pipeline(b.path())?;
    let (fa, fb) = (files(a.path()), files(b.path()));
    if fa != fb {
        return Err(format!("artifact sets differ: {fa:?} vs {fb:?}"));
    }
    let differing: Vec<String> = fa
        .iter()
        .filter(|f| std::fs::read(a.path().join(f)).ok() != std::fs::read(b.path().join(f)).ok())
        .map(|f| f.display().to_string())
        .collect();
    ensure(
        differing.is_empty() && !fa.is_empty(),
        if differing.is_empty() {
            format!("{} artifacts byte-identical", fa.len())
        } else {
            format!("differing: {}", differing.join(", "))
        },
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Check); 10] = [
        (1, "solver oracle equivalence", c1_solver_oracle),
        (2, "width formula self-consistency", c2_width_consistency),
        (3, "gradient check", c3_gradient_check),
        (4, "learning quality", c4_learning_quality),
        (5, "feature-scan dominance", c5_feature_scan),
        (6, "perturbation trend", c6_perturbation_trend),
        (7, "speedup trend", c7_speedup_trend),
        (8, "prediction error concentration", c8_error_concentration),
        (9, "IR-map fidelity", c9_ir_map_fidelity),
        (10, "determinism", c10_determinism),
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, check) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS criterion {id:>2} ({name}): {detail} [{secs:.1} s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {id:>2} ({name}): {detail} [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
