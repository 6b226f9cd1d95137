//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always appear in the test
//! output. Exits non-zero if any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hiersparse::baseline::compare;
use hiersparse::basis::{critical_scale, numerical_rank};
use hiersparse::data::{gen_test_function, Dataset, GridSpec, Sampling, TestFunction};
use hiersparse::diagnostics::{
    alpha_rho, box_lengths, error_functional_weights, importance, power_bound, rank_upper_bound,
    rkhs_bound_check, stability_diag,
};
use hiersparse::faer::Mat;
use hiersparse::hierfit::{fit, fit_trace, norm2, norm_inf, FitSettings, FitTrace, ScaleFit, TerminalStatus};
use hiersparse::kernel::{default_t, gram_sym};
use hiersparse::predict::{intervals, t_quantile};

type Outcome = Result<String, String>;

struct Fixture {
    name: &'static str,
    ds: Dataset,
    trace: FitTrace,
    tol: f64,
}

fn normalized(tf: TestFunction) -> Dataset {
    gen_test_function(tf, tf.default_sampling()).unwrap().normalize()
}

fn build_fixtures() -> Vec<Fixture> {
    let mut out = Vec::new();
    let tf1 = normalized(TestFunction::Tf1);
    out.push(Fixture {
        name: "TF1 tol=1e-2",
        trace: fit_trace(&tf1, &FitSettings::default()).unwrap(),
        ds: tf1,
        tol: 1e-2,
    });
    for (name, tf) in [
        ("TF1", TestFunction::Tf1),
        ("TF2", TestFunction::Tf2),
        ("TF3", TestFunction::Tf3),
        ("TF4", TestFunction::Tf4),
    ] {
        let ds = normalized(tf);
        let trace = fit_trace(&ds, &FitSettings::with_tol(0.0)).unwrap();
        out.push(Fixture {
            name,
            ds,
            trace,
            tol: 0.0,
        });
    }
    out
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1() -> Outcome {
    let ds = normalized(TestFunction::Tf1);
    let start = Instant::now();
    let (model, trace) = fit(&ds, &FitSettings::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let t = default_t(&ds).unwrap();
    let sc = critical_scale(ds.sites.as_ref(), t, 2.0, 1e-10, 25).unwrap().unwrap();
    let ok = trace.terminal_status == TerminalStatus::Converged
        && model.scale <= sc
        && model.residual_2norm <= 1e-2
        && model.sampled_fraction <= 0.5
        && secs < 10.0;
    check(
        ok,
        format!(
            "status={} S_a={} S_c={sc} residual={:.3e} fraction={:.3} time={secs:.2}s",
            trace.terminal_status, model.scale, model.residual_2norm, model.sampled_fraction
        ),
    )
}

fn c2(fx: &[Fixture]) -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for f in fx.iter().filter(|f| f.tol == 0.0) {
        let recs = &f.trace.records;
        let worst_rise = recs
            .windows(2)
            .map(|w| w[1].residual_2norm - w[0].residual_2norm)
            .fold(f64::NEG_INFINITY, f64::max);
        let fnorm = norm2(&f.ds.values);
        let full: Vec<_> = recs.iter().filter(|r| r.rank == f.ds.n()).collect();
        let worst_full = full.iter().map(|r| r.residual_2norm / fnorm).fold(0.0, f64::max);
        ok &= worst_rise <= 1e-12 && !full.is_empty() && worst_full <= 1e-8;
        notes.push(format!(
            "{}: max rise {worst_rise:.1e}, critical rel residual {worst_full:.1e}",
            f.name
        ));
    }
    check(ok, notes.join("; "))
}

fn c3(fx: &[Fixture]) -> Outcome {
    let mut ok = true;
    let mut worst = f64::NEG_INFINITY;
    for f in fx {
        for rec in &f.trace.records {
            let (inner, bound) = rkhs_bound_check(rec);
            worst = worst.max(inner - bound);
            ok &= inner <= bound + 1e-12;
        }
    }
    let f = &fx[0];
    let last = f.trace.last();
    let (inner, _) = rkhs_bound_check(last);
    let limit = norm_inf(&last.coeffs) * (f.ds.n() as f64).sqrt() * f.tol;
    ok &= f.trace.terminal_status == TerminalStatus::Converged && inner <= limit + 1e-12;
    let tail: Vec<f64> = f.trace.records[f.trace.records.len() - 3..]
        .iter()
        .map(|r| rkhs_bound_check(r).1)
        .collect();
    let decreasing = tail[1] < tail[0] && tail[2] < tail[1];
    ok &= decreasing;
    check(
        ok,
        format!(
            "max(inner - bound)={worst:.2e}; converged inner={inner:.2e} <= {limit:.2e}; TF1 final bounds {:.3e} > {:.3e} > {:.3e}",
            tail[0], tail[1], tail[2]
        ),
    )
}

fn c4(fx: &[Fixture]) -> Outcome {
    let mut ok = true;
    let (mut amin, mut slack_min, mut rho_max, mut count) = (f64::INFINITY, f64::INFINITY, 0.0f64, 0);
    for f in fx {
        for w in f.trace.records.windows(2) {
            if w[0].residual_2norm <= f.tol {
                continue;
            }
            let Some((a, rho)) = alpha_rho(&f.ds.values, &w[0].fitted, &w[1].fitted) else {
                continue;
            };
            count += 1;
            amin = amin.min(a);
            slack_min = slack_min.min(1.0 + rho + 1e-10 - a);
            rho_max = rho_max.max(rho);
            ok &= a >= 0.0 && a <= 1.0 + rho + 1e-10 && rho <= 1.0 + 1e-12;
        }
    }
    check(
        ok,
        format!("{count} pairs; min alpha={amin:.3e}, min upper slack={slack_min:.3e}, max rho={rho_max:.6}"),
    )
}

fn c5() -> Outcome {
    let ds = gen_test_function(TestFunction::Tf1, Sampling::Equidistant(40))
        .unwrap()
        .normalize();
    let (model, _) = fit(&ds, &FitSettings::default()).unwrap();
    let sf = ScaleFit::from_model(&ds, &model).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (lo, hi) = (0.5 / 2.5, 1.0);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x = rng.random_range(lo..=hi);
        let (_, psi) = error_functional_weights(&sf, &[x]).unwrap();
        let rec = model.reconstruct_normalized(Mat::from_fn(1, 1, |_, _| x).as_ref()).unwrap()[0];
        worst = worst.max((psi - rec).abs());
    }
    check(worst <= 1e-9, format!("S_a={} max |psi - reconstruct|={worst:.2e}", model.scale))
}

fn c6(fx: &[Fixture]) -> Outcome {
    let f = &fx[0];
    let sf = ScaleFit::from_record(&f.ds, f.trace.last()).unwrap();
    let sweep = Mat::from_fn(200, 1, |i, _| 0.2 + 0.8 * i as f64 / 199.0);
    let pd = power_bound(&sf, sweep.as_ref()).unwrap();
    let lo = pd.power_sq.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = pd.power_sq.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut ok = lo >= -1e-8 && hi <= 1.0 + 1e-8;

    let full = &fx[1];
    let rec = full
        .trace
        .records
        .iter()
        .find(|r| r.rank == full.ds.n())
        .expect("TF1 reaches full rank");
    let sf = ScaleFit::from_record(&full.ds, rec).unwrap();
    let nodes = full.ds.sites.as_ref();
    let pd = power_bound(&sf, nodes).unwrap();
    let node_max = pd.power_sq.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ok &= node_max <= 1e-8;
    check(
        ok,
        format!(
            "sweep power_sq in [{lo:.3e}, {hi:.3e}]; full-rank nodes (s={}) max power_sq={node_max:.2e}",
            rec.s
        ),
    )
}

fn c7(fx: &[Fixture]) -> Outcome {
    let mut ok = true;
    let mut count = 0;
    let mut min_gap = f64::INFINITY;
    for f in fx {
        for rec in &f.trace.records {
            let sf = ScaleFit::from_record(&f.ds, rec).unwrap();
            let st = stability_diag(&sf).unwrap();
            count += 1;
            min_gap = min_gap.min(st.upper - st.lower);
            ok &= st.lower <= st.upper;
        }
    }
    check(ok, format!("{count} fixture scales; min(upper - lower)={min_gap:.3e}"))
}

fn c8() -> Outcome {
    let ds = normalized(TestFunction::Tf1);
    let t = default_t(&ds).unwrap();
    let lengths = box_lengths(&ds);
    let mut ok = true;
    let mut cells = Vec::new();
    for s in 0..=6 {
        let eps = t / 2f64.powi(s);
        let g = gram_sym(ds.sites.as_ref(), eps).unwrap();
        let r = numerical_rank(g.as_ref(), 1e-10).unwrap();
        let b = rank_upper_bound(&lengths, eps, 1e-10);
        ok &= r as f64 <= b;
        cells.push(format!("s{s}:{r}<={b:.1}"));
    }
    check(ok, cells.join(" "))
}

/// Student-t CDF by composite Simpson integration of the density.
fn t_cdf_simpson(t: f64, nu: f64) -> f64 {
    fn ln_gamma_half(k: u32) -> f64 {
        // Γ(k/2) by recurrence from Γ(1/2) and Γ(1)
        let (mut v, mut z) = if k % 2 == 0 { (0.0, 1.0) } else { (0.5 * std::f64::consts::PI.ln(), 0.5) };
        while z < k as f64 / 2.0 - 1e-12 {
            v += z.ln();
            z += 1.0;
        }
        v
    }
    let k = nu as u32;
    let c = (ln_gamma_half(k + 1) - ln_gamma_half(k) - 0.5 * (nu * std::f64::consts::PI).ln()).exp();
    let pdf = |x: f64| c * (1.0 + x * x / nu).powf(-(nu + 1.0) / 2.0);
    let m = 20_000;
    let h = t / m as f64;
    let mut acc = pdf(0.0) + pdf(t);
    for i in 1..m {
        acc += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    0.5 + acc * h / 3.0
}

fn c9() -> Outcome {
    let raw = gen_test_function(TestFunction::Tf2, Sampling::Equidistant(200)).unwrap();
    let ds = raw.normalize();
    let settings = FitSettings::default();
    let (model, trace) = fit(&ds, &settings).unwrap();
    let held = gen_test_function(TestFunction::Tf2, Sampling::Uniform { n: 50, seed: 7 }).unwrap();
    let held = held.normalize_with(&ds.normalization).unwrap();

    let band_at = |s: usize| {
        let sf = ScaleFit::from_record(&ds, trace.record(s).unwrap()).unwrap();
        intervals(&sf, held.sites.as_ref(), 0.05).unwrap()
    };
    let b0 = band_at(0);
    let ba = band_at(model.scale);
    let mut ok = trace.terminal_status == TerminalStatus::Converged
        && ba.mean_pred_half_width() < b0.mean_pred_half_width();

    let mid = 2;
    let bm = band_at(mid);
    let inside = (0..held.n()).filter(|&i| bm.pred_contains(i, held.values[i])).count();
    let coverage = inside as f64 / held.n() as f64;
    ok &= (0.85..=1.0).contains(&coverage);

    let tq = t_quantile(0.975, 10).unwrap();
    let oracle = t_cdf_simpson(tq, 10.0);
    ok &= (tq - 2.2281).abs() <= 1e-3 && (oracle - 0.975).abs() < 1e-9;
    check(
        ok,
        format!(
            "mean pred half-width s=0 {:.4} > S_a={} {:.4}; coverage at s={mid}: {inside}/50; t(0.975,10)={tq:.6} (Simpson CDF {oracle:.10})",
            b0.mean_pred_half_width(),
            model.scale,
            ba.mean_pred_half_width()
        ),
    )
}

fn c10() -> Outcome {
    let raw = gen_test_function(TestFunction::Tf2, Sampling::Equidistant(200)).unwrap();
    let ds = raw.normalize();
    let settings = FitSettings::default();
    let rep = importance(&ds, 0, 200, &settings).unwrap();
    let (lo, hi) = (-500.0 + 1000.0 / 3.0, 500.0 - 1000.0 / 3.0);
    let middle: u32 = (0..ds.n())
        .filter(|&i| (lo..=hi).contains(&raw.sites[(i, 0)]))
        .map(|i| rep.histogram[i][0])
        .sum();
    let share = middle as f64 / rep.n_runs as f64;

    let t = default_t(&ds).unwrap();
    let sc = critical_scale(ds.sites.as_ref(), t, 2.0, 1e-10, 25).unwrap().unwrap();
    let near = sc - 1;
    let rep_near = importance(&ds, near, 200, &settings).unwrap();
    let top = rep_near.max_top_share();
    check(
        share > 0.5 && top <= 0.5,
        format!("scale 0 middle-third rank-1 share={share:.3}; scale {near} (S_c={sc}) max site share={top:.3}"),
    )
}

fn c11() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for tf in [TestFunction::Tf1, TestFunction::Tf2] {
        let ds = normalized(tf);
        let (lo, hi) = tf.domain();
        let scale = ds.normalization.axis_scales[0];
        let q = Mat::from_fn(1000, 1, |i, _| (lo + (hi - lo) * i as f64 / 999.0) / scale);
        let rep = compare(&ds, &FitSettings::default(), q.as_ref()).unwrap();
        let monotone = |v: Vec<f64>| v.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        let eh: Vec<f64> = rep.rows.iter().filter_map(|r| r.err_hier).collect();
        let ec: Vec<f64> = rep.rows.iter().filter_map(|r| r.err_cascade).collect();
        let reached = rep.hier_status == TerminalStatus::Converged && rep.cascade_status == TerminalStatus::Converged;
        ok &= reached && rep.kevals_hier <= rep.kevals_cascade && monotone(eh) && monotone(ec);
        notes.push(format!(
            "{tf}: hier S_a={} kevals={} vs cascade s*={} kevals={}",
            rep.hier_scale, rep.kevals_hier, rep.cascade_scale, rep.kevals_cascade
        ));
    }
    check(ok, notes.join("; "))
}

fn c12() -> Outcome {
    let ds = gen_test_function(TestFunction::Tf1, Sampling::Uniform { n: 40, seed: 7 })
        .unwrap()
        .normalize();
    let (model, trace) = fit(&ds, &FitSettings::default()).unwrap();
    let grid = Mat::from_fn(400, 1, |i, _| 0.5 + 2.0 * i as f64 / 399.0);
    let pred = model.reconstruct(grid.as_ref()).unwrap();
    let vs = ds.normalization.value_scale;
    let err = (0..400)
        .map(|i| ((pred[i] - TestFunction::Tf1.eval(&[grid[(i, 0)]])) / vs).abs())
        .fold(0.0, f64::max);
    check(
        trace.terminal_status == TerminalStatus::Converged && err <= 0.15,
        format!("status={} S_a={} max abs error={err:.4}", trace.terminal_status, model.scale),
    )
}

fn bump_surface() -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let bumps: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(10.0..50.0),
                rng.random_range(10.0..50.0),
                rng.random_range(6.0..14.0),
                rng.random_range(80.0..160.0),
            )
        })
        .collect();
    let grid = GridSpec::new(vec![0.0, 0.0], 1.0, vec![60, 60]).unwrap();
    let nodes = grid.nodes();
    let values = (0..grid.len())
        .map(|i| {
            let (x, y) = (nodes[(i, 0)], nodes[(i, 1)]);
            200.0
                + bumps
                    .iter()
                    .map(|&(cx, cy, w, a)| a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * w * w)).exp())
                    .sum::<f64>()
        })
        .collect();
    Dataset::new(nodes, values).unwrap()
}

fn c13() -> Outcome {
    let raw = bump_surface();
    let ds = raw.normalize();
    let (model, trace) = fit(&ds, &FitSettings::default()).unwrap();
    let rec = model.reconstruct(raw.sites.as_ref()).unwrap();
    let err = rec
        .iter()
        .zip(&raw.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let lo = raw.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rel = err / (hi - lo);
    check(
        trace.terminal_status == TerminalStatus::Converged && model.sampled_fraction < 0.6 && rel < 0.05,
        format!(
            "status={} S_a={} sites {}/{} ({:.1}%), inf-norm error {err:.3e} = {:.3}% of range",
            trace.terminal_status,
            model.scale,
            model.len(),
            ds.n(),
            100.0 * model.sampled_fraction,
            100.0 * rel
        ),
    )
}

fn run(id: usize, title: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let res = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let secs = start.elapsed().as_secs_f64();
    let (tag, detail, ok) = match res {
        Ok(d) => ("PASS", d, true),
        Err(d) => ("FAIL", d, false),
    };
    println!("criterion {id:>2} {tag} [{title}] {detail} ({secs:.1}s)");
    ok
}

fn main() {
    let start = Instant::now();
    let fixtures = build_fixtures();
    println!(
        "acceptance: fixtures ready in {:.1}s ({})",
        start.elapsed().as_secs_f64(),
        fixtures
            .iter()
            .map(|f| format!("{} {} scales, {}", f.name, f.trace.records.len(), f.trace.terminal_status))
            .collect::<Vec<_>>()
            .join(", ")
    );
    let fx = &fixtures;
    let results = [
        run(1, "TF1 convergence", c1),
        run(2, "monotone residual decay", || c2(fx)),
        run(3, "RKHS inner-product bound", || c3(fx)),
        run(4, "update factor range", || c4(fx)),
        run(5, "error-functional consistency", c5),
        run(6, "power function range", || c6(fx)),
        run(7, "stability bounds", || c7(fx)),
        run(8, "numerical rank bound", c8),
        run(9, "interval behavior", c9),
        run(10, "importance concentration", c10),
        run(11, "cascade comparison", c11),
        run(12, "non-uniform sampling", c12),
        run(13, "synthetic surface compression", c13),
    ];
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
