//! The four subcommands. Each returns an [`Outcome`] carrying the
//! machine-readable result plus its text and CSV renderings.

use std::fmt::Write as _;

use ftwist_core::classify::{classify_all, ClassificationReport, ClassifyOptions};
use ftwist_core::finsler::{geodesic, NumericPlan, Trajectory};
use ftwist_core::real::reals;
use ftwist_core::tensor::multi_indices;
use ftwist_core::verify::{battery, verify, warped_curvature_residuals, warped_theorem_applies, RowKind};
use ftwist_core::{BlockTensor, ProductSpec, Real, VerifyOptions};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;

pub struct Outcome {
    pub result: Value,
    pub text: String,
    pub csv: String,
    pub exit: u8,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize to JSON")
}

#[derive(Serialize)]
struct BlockEntry {
    index: Vec<usize>,
    value: Real,
}

#[derive(Serialize)]
struct Block {
    label: String,
    max_abs: f64,
    entries: Vec<BlockEntry>,
}

#[derive(Serialize)]
struct Object {
    name: &'static str,
    blocks: Vec<Block>,
}

fn blocks_of(name: &'static str, t: &BlockTensor) -> Object {
    let mut blocks: Vec<Block> = t
        .patterns()
        .into_iter()
        .map(|p| Block {
            label: BlockTensor::label(&p),
            max_abs: t.block_max(&p),
            entries: Vec::new(),
        })
        .collect();
    let patterns = t.patterns();
    for idx in multi_indices(t.tensor.dim(), t.rank()) {
        let pat = t.pattern(&idx);
        let k = patterns.iter().position(|p| *p == pat).expect("every index has a pattern");
        blocks[k].entries.push(BlockEntry {
            value: t.tensor.get(&idx),
            index: idx,
        });
    }
    Object { name, blocks }
}

/// Every closed-form object at one sample, split into labelled blocks.
pub fn inspect(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.single_product()?;
    let t = spec.instantiate()?;
    let plan = NumericPlan::default();
    let sample = match &cfg.point {
        Some(p) => ftwist_core::TangentSample::from_f64(&p.x, &p.y),
        None => battery(&spec, &t, 1, cfg.seed)?.remove(0),
    };
    let p = t.point(&sample.x, &sample.y, &plan)?;
    let objects = vec![
        blocks_of("metric", &p.block_metric()?),
        blocks_of("spray", &p.spray()?),
        blocks_of("nonlinear connection", &p.connection_blocks()?),
        blocks_of("vertical coefficients", &p.vertical_coefficients()?),
        blocks_of("cartan tensor", &p.cartan_blocks()?),
        blocks_of("horizontal coefficients", &p.horizontal_coeffs()?),
        blocks_of("berwald curvature", &p.berwald_blocks()?),
        blocks_of("mean berwald curvature", &p.mean_berwald_blocks()?),
        blocks_of("nonlinear curvature", &p.nonlinear_curvature()?),
        blocks_of("curvature", &p.berwald_connection_curvature()?),
    ];
    let warped = if warped_theorem_applies(&spec) {
        Some(warped_curvature_residuals(&p)?)
    } else {
        None
    };
    let grad_sq = p.grad_twist_norm_sq()?;

    let mut text = String::new();
    let _ = writeln!(text, "product {} (n1 = {}, n2 = {})", spec.id, p.n1(), p.n2());
    let _ = writeln!(text, "x = {:?}", ftwist_core::real::to_f64s(&sample.x));
    let _ = writeln!(text, "y = {:?}", ftwist_core::real::to_f64s(&sample.y));
    let _ = writeln!(text, "F = {}  f = {}  |grad f|^2 = {grad_sq}", p.norm(), p.twist());
    let mut csv = String::from("object,block,index,value\n");
    for o in &objects {
        let _ = writeln!(text, "\n{}", o.name);
        for b in &o.blocks {
            let _ = writeln!(text, "  [{}] max |.| = {:.3e}", b.label, b.max_abs);
            for e in &b.entries {
                let _ = writeln!(text, "    {:?} {:.17e}", e.index, e.value.to_f64());
                let idx: Vec<String> = e.index.iter().map(|i| i.to_string()).collect();
                let _ = writeln!(csv, "{},{},{},{:e}", o.name, b.label, idx.join(" "), e.value.to_f64());
            }
        }
    }
    if let Some((minus, plus)) = warped {
        let _ = writeln!(
            text,
            "\nwarped relation: |grad f|^2 = {grad_sq}, R^γ_αβλ vs R2 - |grad f|^2 (δ^γ_λ g_αβ - δ^γ_β g_αλ): residual {minus:.3e}; with + sign: residual {plus:.3e}"
        );
    }
    let result = json!({
        "product": spec.id,
        "dims": [p.n1(), p.n2()],
        "sample": sample,
        "norm": p.norm(),
        "twist": p.twist(),
        "grad_f_norm_sq": grad_sq,
        "objects": to_value(&objects),
        "warped_relation": warped.map(|(minus, plus)| json!({ "residual": minus, "residual_plus_sign": plus })),
    });
    Ok(Outcome { result, text, csv, exit: 0 })
}

pub fn verify_cmd(cfg: &RunConfig, corrupt: Option<String>) -> Result<Outcome, CliError> {
    let specs = cfg.products()?;
    let opts = VerifyOptions {
        seed: cfg.seed,
        samples: cfg.samples,
        third_order_samples: cfg.third_order_samples.min(cfg.samples),
        curvature_samples: cfg.curvature_samples.min(cfg.samples),
        tol: cfg.tolerance,
        corrupt,
        plan: NumericPlan::default(),
    };
    let report = verify(&specs, &opts)?;
    let mut text = String::new();
    let mut csv = String::from("entry,identity,kind,tolerance,samples,max_residual,pass,errata_candidate\n");
    for e in &report.entries {
        let _ = writeln!(text, "{} (n1 = {}, n2 = {})", e.id, e.dims.0, e.dims.1);
        for r in &e.rows {
            let kind = match r.kind {
                RowKind::Check => "check",
                RowKind::Reading => "reading",
            };
            let status = match (r.kind, r.pass) {
                (RowKind::Check, true) => "pass",
                (RowKind::Check, false) => "FAIL",
                (RowKind::Reading, true) => "agrees",
                (RowKind::Reading, false) => "disagrees",
            };
            let flag = if r.errata_candidate { "  errata candidate" } else { "" };
            let _ = writeln!(
                text,
                "  {:<52} {:>10.3e} / {:<8.1e} {:>4} {status}{flag}",
                r.identity, r.max_residual, r.tolerance, r.samples
            );
            let _ = writeln!(
                csv,
                "{},\"{}\",{kind},{:e},{},{:e},{},{}",
                e.id, r.identity, r.tolerance, r.samples, r.max_residual, r.pass, r.errata_candidate
            );
        }
    }
    let _ = writeln!(text, "\nerrata candidates: {}", report.errata_candidates.len());
    for c in &report.errata_candidates {
        let _ = writeln!(text, "  {c}");
    }
    let _ = writeln!(text, "{}", if report.passed { "all checks pass" } else { "some checks FAIL" });
    let exit = if report.passed { 0 } else { 1 };
    Ok(Outcome {
        result: to_value(&report),
        text,
        csv,
        exit,
    })
}

#[derive(Serialize)]
struct ProductClassification {
    product: String,
    reports: Vec<ClassificationReport>,
}

pub fn classify_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let opts = ClassifyOptions {
        tol: cfg.tolerance,
        seed: cfg.seed,
        plan: NumericPlan::default(),
    };
    let mut all = Vec::new();
    for spec in cfg.products()? {
        let t = spec.instantiate()?;
        let samples = battery(&spec, &t, cfg.samples, cfg.seed)?;
        all.push(ProductClassification {
            product: spec.id.clone(),
            reports: classify_all(&t, &samples, &opts)?,
        });
    }
    let mut text = String::new();
    let mut csv = String::from("product,predicate,verdict,max_residual,tolerance,theorem_consistent\n");
    let mut consistent = true;
    for pc in &all {
        let _ = writeln!(text, "{}", pc.product);
        for r in &pc.reports {
            consistent &= r.theorem_consistent;
            let verdict = to_value(&r.verdict);
            let verdict = verdict.as_str().unwrap_or_default();
            let _ = writeln!(
                text,
                "  {:<20} {:<12} max {:.3e} (tol {:.1e}) theorem {}",
                r.predicate,
                verdict,
                r.max_residual,
                r.tolerance,
                if r.theorem_consistent { "consistent" } else { "INCONSISTENT" }
            );
            for c in &r.checks {
                let _ = writeln!(text, "      {:<50} {:.3e} {}", c.name, c.max_residual, if c.holds { "holds" } else { "fails" });
            }
            for n in &r.notes {
                let _ = writeln!(text, "      note: {n}");
            }
            for w in &r.warnings {
                let _ = writeln!(text, "      warning: {w}");
            }
            let _ = writeln!(
                csv,
                "{},{},{verdict},{:e},{:e},{}",
                pc.product, r.predicate, r.max_residual, r.tolerance, r.theorem_consistent
            );
        }
    }
    Ok(Outcome {
        result: json!({ "products": to_value(&all), "theorem_consistent": consistent }),
        text,
        csv,
        exit: if consistent { 0 } else { 1 },
    })
}

fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.states[0].x.len();
    let mut out = String::from("t");
    for i in 1..=n {
        let _ = write!(out, ",x{i}");
    }
    for i in 1..=n {
        let _ = write!(out, ",xdot{i}");
    }
    out.push_str(",F\n");
    for s in &traj.states {
        let _ = write!(out, "{}", s.t);
        for v in s.x.iter().chain(&s.xdot) {
            let _ = write!(out, ",{:e}", v.to_f64());
        }
        let _ = writeln!(out, ",{:e}", s.speed.to_f64());
    }
    out
}

pub fn geodesic_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec: ProductSpec = cfg.single_product()?;
    let g = cfg
        .geodesic
        .as_ref()
        .ok_or_else(|| CliError::Config("geodesic needs a 'geodesic' section with x0 and y0".into()))?;
    let t = spec.instantiate()?;
    let traj = geodesic(&t, &reals(&g.x0), &reals(&g.y0), g.t_end, g.dt, &NumericPlan::default())?;
    let drift = traj.speed_drift();
    let summary = match &traj.exit {
        None => format!("# F drift {drift:e} over t = {} at dt = {}", g.t_end, g.dt),
        Some(why) => format!("# F drift {drift:e}; integration stopped early: {why}"),
    };
    let mut csv = trajectory_csv(&traj);
    csv.push_str(&summary);
    csv.push('\n');
    let last = traj.last();
    let text = format!(
        "geodesic on {} from x0 = {:?} with y0 = {:?}\nsteps {}  end t = {}\nend x = {:?}\n{}\n",
        spec.id,
        g.x0,
        g.y0,
        traj.states.len() - 1,
        last.t,
        ftwist_core::real::to_f64s(&last.x),
        summary.trim_start_matches("# ")
    );
    Ok(Outcome {
        result: json!({
            "product": spec.id,
            "trajectory": to_value(&traj),
            "speed_drift": drift,
            "truncated": traj.truncated(),
        }),
        text,
        csv,
        exit: if traj.truncated() { 4 } else { 0 },
    })
}
