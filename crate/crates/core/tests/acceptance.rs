//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines always reach the output; exits nonzero on failure.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use tailshift::copula::{
    frechet_cdf, frechet_quantile, kendall_tau, sample_gumbel, sample_t_copula, Copula, MarginTransform, Margins,
    Model, ParameterPath, Scenario,
};
use tailshift::harness::{run, ExperimentPlan, PillowConfig, PowerTable, ScenarioCell, TestKind};
use tailshift::io::{read_dataset, Column, DatasetSpec, RowFilter};
use tailshift::limit::{pillow_critical_values, EstimatedLimit};
use tailshift::pipeline::{analyze, AnalysisConfig};
use tailshift::rng::substream;
use tailshift::sample::{equidistant, Comparison, LowerSet};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

fn plan(id: &str, scenario: Scenario, b: usize, k: usize, replications: usize) -> ExperimentPlan {
    ExperimentPlan {
        scenarios: vec![ScenarioCell {
            id: id.into(),
            parameter: None,
            scenario,
        }],
        blocks: vec![b],
        exceedances: vec![k],
        replications,
        sizes: vec![0.05],
        seed: 1,
        norm: Default::default(),
        cap: tailshift::sample::DEFAULT_CANDIDATE_CAP,
        bivariate: Default::default(),
        pillow: PillowConfig::default(),
        limit_replications: None,
    }
}

fn gumbel(d: usize, alpha: f64, transform: MarginTransform) -> Scenario {
    Scenario {
        n: 2000,
        d,
        copula: Copula::Gumbel {
            lambda: ParameterPath::Constant { value: 2.0 },
        },
        margins: Margins { alpha, transform },
    }
}

fn frequencies(table: &PowerTable, id: &str, b: usize, k: usize) -> (f64, f64, usize, usize) {
    let row = |t| table.row(id, b, k, t, 0.05).expect("row present");
    let (ks, cm) = (row(TestKind::Ks), row(TestKind::Cm));
    (ks.frequency, cm.frequency, ks.rejections, cm.rejections)
}

/// Central 95% acceptance region `[lo, hi]` of Binomial(n, p), from the pmf.
fn binomial_region(n: usize, p: f64) -> (usize, usize) {
    let mut pmf = vec![0.0; n + 1];
    pmf[0] = (1.0 - p).powi(n as i32);
    for c in 1..=n {
        pmf[c] = pmf[c - 1] * (n - c + 1) as f64 / c as f64 * p / (1.0 - p);
    }
    let mut below = 0.0;
    let mut lo = 0;
    for (c, v) in pmf.iter().enumerate() {
        // P(X ≥ c) = 1 − P(X < c)
        if 1.0 - below >= 0.975 {
            lo = c;
        }
        below += v;
    }
    let mut above = 0.0;
    let mut hi = n;
    for c in (0..=n).rev() {
        if 1.0 - above >= 0.975 {
            hi = c;
        }
        above += pmf[c];
    }
    // lo: largest c with P(X < c) ≤ 0.025; hi: smallest c with P(X > c) ≤ 0.025
    (lo, hi)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let seed = PillowConfig::default().seed;
    let table = match pillow_critical_values(0.005, 2000, &[0.05, 0.10], seed) {
        Ok(t) => t,
        Err(e) => return outcome(false, e.to_string()),
    };
    let elapsed = start.elapsed();
    let targets = [(0.05, 0.8135, 0.1939), (0.10, 0.7626, 0.1621)];
    let mut pass = elapsed <= Duration::from_secs(120);
    let mut parts = Vec::new();
    for (size, ks, cm) in targets {
        let e = table.entry(size).expect("size present");
        pass &= (e.ks - ks).abs() <= 0.02 && (e.cm - cm).abs() <= 0.012;
        parts.push(format!("{size}: KS {:.4} (target {ks}) CM {:.4} (target {cm})", e.ks, e.cm));
    }
    outcome(pass, format!("{}; seed {seed}; {}", parts.join(", "), secs(elapsed)))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let p = plan("gumbel", gumbel(2, 2.0, MarginTransform::None), 50, 10, 200);
    let table = match run(&p) {
        Ok(t) => t,
        Err(e) => return outcome(false, e.to_string()),
    };
    let elapsed = start.elapsed();
    let (ks, cm, rk, rc) = frequencies(&table, "gumbel", 50, 10);
    let check = |count: usize, freq: f64, target: f64| {
        let (lo, hi) = binomial_region(200, target);
        ((lo..=hi).contains(&count) && (freq - target).abs() <= 0.04, (lo, hi))
    };
    let (ok_ks, region_ks) = check(rk, ks, 0.04);
    let (ok_cm, region_cm) = check(rc, cm, 0.06);
    outcome(
        ok_ks && ok_cm && elapsed <= Duration::from_secs(300),
        format!(
            "KS {ks:.3} ({rk}/200, region {region_ks:?} around 0.04), CM {cm:.3} ({rc}/200, region {region_cm:?} around 0.06); {}",
            secs(elapsed)
        ),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let scenario = Scenario {
        n: 2000,
        d: 3,
        copula: Copula::Preset {
            model: Model::TJump,
            parameter: 0.75,
        },
        margins: Margins {
            alpha: 4.0,
            transform: MarginTransform::None,
        },
    };
    let mut p = plan("t_jump", scenario, 50, 20, 100);
    p.limit_replications = Some(200);
    let table = match run(&p) {
        Ok(t) => t,
        Err(e) => return outcome(false, e.to_string()),
    };
    let (ks, cm, _, _) = frequencies(&table, "t_jump", 50, 20);
    outcome(
        ks >= 0.90 && cm >= 0.90,
        format!("KS {ks:.2}, CM {cm:.2} (need >= 0.90); {}", secs(start.elapsed())),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let p = plan("sine", gumbel(2, 4.0, MarginTransform::SineFactor), 50, 10, 200);
    let table = match run(&p) {
        Ok(t) => t,
        Err(e) => return outcome(false, e.to_string()),
    };
    let (ks, cm, _, _) = frequencies(&table, "sine", 50, 10);
    outcome(
        ks <= 0.10 && cm <= 0.10,
        format!("KS {ks:.3}, CM {cm:.3} (need <= 0.10); {}", secs(start.elapsed())),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = common::rng(20);
    let mut worst = 0.0f64;
    let mut worst_nonzero = 0.0f64;
    let mut zeros = 0;
    let mut detail = String::new();
    for _ in 0..50 {
        let (rows, b, k) = common::oracle_instance(&mut rng);
        let n = rows.len();
        let (ks, cm) = common::oracle_statistics(&rows, b, k);
        let s = match analyze(&equidistant(rows), &AnalysisConfig::new(b, k)) {
            Ok(a) => a.statistics,
            Err(e) => return outcome(false, e.to_string()),
        };
        let err = common::relative_error(s.ks, ks).max(common::relative_error(s.cm, cm));
        if ks > 1e-9 {
            worst_nonzero = worst_nonzero.max(err);
        } else {
            zeros += 1;
        }
        if err > worst {
            worst = err;
            detail = format!("n={n} b={b} k={k}: KS {} vs {ks}, CM {} vs {cm}", s.ks, s.cm);
        }
    }
    outcome(
        worst <= 1e-6,
        format!(
            "50 instances ({zeros} degenerate), worst relative error {worst:.2e} ({detail}), worst on nondegenerate {worst_nonzero:.2e}"
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = common::rng(6);
    let mut failures = Vec::new();
    for (n, k) in [(30, 3), (50, 10), (7, 1)] {
        let rows = common::random_rows(&mut rng, n);
        let s = analyze(&equidistant(rows), &AnalysisConfig::new(n, k)).unwrap().statistics;
        if (s.ks, s.cm) != (0.0, 0.0) {
            failures.push(format!("single block n={n}: ({}, {})", s.ks, s.cm));
        }
    }
    for (d, b, k) in [(2, 10, 3), (3, 25, 5), (4, 8, 7)] {
        let direction: Vec<f64> = (1..=d).map(|j| j as f64 * 1.5).collect();
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|i| {
                let r = 2f64.powi((i * 7 % 31) - 15);
                direction.iter().map(|v| v * r).collect()
            })
            .collect();
        let s = analyze(&equidistant(rows), &AnalysisConfig::new(b, k)).unwrap().statistics;
        if (s.ks, s.cm) != (0.0, 0.0) {
            failures.push(format!("constant angle d={d}: ({}, {})", s.ks, s.cm));
        }
    }
    for (n, b, k) in [(400, 20, 4), (230, 50, 10)] {
        let rows = common::random_rows(&mut rng, n);
        let factors: Vec<f64> = (0..n / b + 1).map(|j| 1e-3 + 0.37 * (j * j) as f64 + 0.1 * j as f64).collect();
        let scaled: Vec<Vec<f64>> = rows
            .iter()
            .enumerate()
            .map(|(i, x)| x.iter().map(|v| v * factors[i / b]).collect())
            .collect();
        let config = AnalysisConfig::new(b, k);
        let a = analyze(&equidistant(rows), &config).unwrap().statistics;
        let c = analyze(&equidistant(scaled), &config).unwrap().statistics;
        if a.ks.to_bits() != c.ks.to_bits() || a.cm.to_bits() != c.cm.to_bits() {
            failures.push(format!("rescaling n={n} b={b}: ({}, {}) vs ({}, {})", a.ks, a.cm, c.ks, c.cm));
        }
    }
    let pass = failures.is_empty();
    outcome(
        pass,
        if pass {
            "single blocks and constant angles give exact zeros; rescaled blocks are bit-identical".into()
        } else {
            failures.join("; ")
        },
    )
}

fn criterion_7() -> Outcome {
    let draws = 10_000;
    let tau_of = |sample: &dyn Fn(&mut tailshift::rng::StreamRng) -> Vec<f64>, seed: u64| {
        let mut rng = substream(seed, &[]);
        let (x, y): (Vec<f64>, Vec<f64>) = (0..draws)
            .map(|_| {
                let u = sample(&mut rng);
                (u[0], u[1])
            })
            .unzip();
        kendall_tau(&x, &y)
    };
    let (g, g_se) = tau_of(&|rng| sample_gumbel(2, 2.0, rng).unwrap(), 71);
    let (t, t_se) = tau_of(&|rng| sample_t_copula(2, 2.0, 0.5, rng).unwrap(), 72);
    let t_target = 2.0 / std::f64::consts::PI * 0.5f64.asin();
    let gumbel_ok = (g - 0.5).abs() <= 3.0 * g_se;
    let t_ok = (t - t_target).abs() <= 3.0 * t_se;
    let mut round_trip = 0.0f64;
    for alpha in [0.5, 1.0, 2.0, 4.0] {
        for i in 1..10_000 {
            let u = i as f64 / 10_000.0;
            let x = frechet_quantile(u, alpha, 1.0).unwrap();
            round_trip = round_trip.max((frechet_cdf(x, alpha, 1.0) - u).abs());
        }
    }
    outcome(
        gumbel_ok && t_ok && round_trip <= 1e-12,
        format!(
            "Gumbel tau {g:.4} (0.5, se {g_se:.4}), t tau {t:.4} ({t_target:.4}, se {t_se:.4}), Frechet round trip {round_trip:.1e}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = common::rng(8);
    let rows: Vec<Vec<f64>> = common::random_rows(&mut rng, 150)
        .into_iter()
        .zip(common::random_rows(&mut rng, 150))
        .map(|(a, b)| vec![a[0], a[1], b[0]])
        .collect();
    let analysis = analyze(&equidistant(rows), &AnalysisConfig::new(30, 4)).unwrap();
    let path = &analysis.path;
    let limit = EstimatedLimit::new(path).unwrap();
    let nodes = limit.nodes().to_vec();
    let atoms = limit.atoms().to_vec();
    let draws: Vec<_> = (0..20_000u64).map(|r| limit.draw(&mut substream(88, &[r]))).collect();

    use rand::Rng;
    let closed = |corner: Vec<f64>| LowerSet {
        corner,
        mode: Comparison::Closed,
    };
    let mut probes = Vec::new();
    while probes.len() < 5 {
        let pick = |rng: &mut rand_chacha::ChaCha8Rng| {
            let a = &atoms[rng.random_range(0..atoms.len())];
            closed(a[..2].to_vec())
        };
        let (a, b) = (pick(&mut rng), pick(&mut rng));
        let (i, j) = (rng.random_range(1..nodes.len() - 1), rng.random_range(1..nodes.len() - 1));
        let sa = path.eval(1.0, &a).unwrap();
        let sb = path.eval(1.0, &b).unwrap();
        if sa > 0.0 && sa < 1.0 && sb > 0.0 && sb < 1.0 {
            probes.push((i, j, a, b, sa, sb));
        }
    }
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, j, a, b, sa, sb) in probes {
        let meet = closed(a.corner.iter().zip(&b.corner).map(|(x, y)| x.min(*y)).collect());
        let (s, t) = (nodes[i], nodes[j]);
        let expected = (s.min(t) - s * t) * (path.eval(1.0, &meet).unwrap() - sa * sb);
        let pairs: Vec<(f64, f64)> = draws
            .iter()
            .map(|d| (limit.value(d, i, &a), limit.value(d, j, &b)))
            .collect();
        let m = pairs.len() as f64;
        let (mx, my) = pairs.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0 / m, acc.1 + p.1 / m));
        let products: Vec<f64> = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).collect();
        let cov = products.iter().sum::<f64>() / m;
        let se = (products.iter().map(|v| (v - cov).powi(2)).sum::<f64>() / (m - 1.0)).sqrt() / m.sqrt();
        pass &= (cov - expected).abs() <= 3.0 * se;
        parts.push(format!("{cov:.5}/{expected:.5} (se {se:.5})"));
    }
    outcome(pass, format!("empirical/expected over 20000 draws: {}", parts.join(", ")))
}

fn criterion_9() -> Option<Outcome> {
    let path = std::env::var("TAILSHIFT_DANISH").ok()?;
    let threshold = std::env::var("TAILSHIFT_DANISH_THRESHOLD")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(1e6);
    let columns: Vec<Column> = std::env::var("TAILSHIFT_DANISH_COLUMNS")
        .unwrap_or_else(|_| "0,1".into())
        .split(',')
        .map(|c| c.trim().parse().unwrap())
        .collect();
    let mut spec = DatasetSpec::new(&path);
    spec.columns = columns;
    spec.time_column = std::env::var("TAILSHIFT_DANISH_TIME").ok().map(|c| c.parse().unwrap());
    spec.has_header = std::env::var("TAILSHIFT_DANISH_NO_HEADER").is_err();
    spec.filters = vec![RowFilter::AllComponents { threshold }];
    let result = read_dataset(&spec).and_then(|sample| {
        let n = sample.len();
        analyze(&sample, &AnalysisConfig::new(50, 10)).map(|a| (n, a.statistics))
    });
    Some(match result {
        Ok((n, s)) => outcome(
            (s.ks - 0.953).abs() <= 1e-3 && (s.cm - 0.384).abs() <= 1e-3,
            format!("{n} claims above {threshold}: KS {:.4} (0.953), CM {:.4} (0.384)", s.ks, s.cm),
        ),
        Err(e) => outcome(false, format!("{path}: {e}")),
    })
}

/// Rejection frequency against the jump size, logged only.
fn power_trend() -> String {
    let freqs: Vec<String> = [0.2, 0.5, 0.75]
        .iter()
        .map(|&rho| {
            let scenario = Scenario {
                n: 2000,
                d: 2,
                copula: Copula::Preset {
                    model: Model::TJump,
                    parameter: rho,
                },
                margins: Margins {
                    alpha: 4.0,
                    transform: MarginTransform::None,
                },
            };
            let table = run(&plan("t_jump", scenario, 50, 10, 100)).unwrap();
            let (ks, cm, _, _) = frequencies(&table, "t_jump", 50, 10);
            format!("rho {rho}: KS {ks:.2} CM {cm:.2}")
        })
        .collect();
    freqs.join(", ")
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters go through here too
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check); 8] = [
        ("pillow critical values", criterion_1),
        ("size control, Gumbel null", criterion_2),
        ("power, trivariate t jump", criterion_3),
        ("marginal change insensitivity", criterion_4),
        ("oracle equivalence", criterion_5),
        ("exact-zero invariants", criterion_6),
        ("sampler calibration", criterion_7),
        ("limit-process covariance", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += usize::from(!o.pass);
        println!("{} criterion {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    match criterion_9() {
        Some(o) => {
            failed += usize::from(!o.pass);
            println!("{} criterion 9: Danish claims: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        }
        None => println!("WAIVED criterion 9: Danish claims: TAILSHIFT_DANISH not set, dataset unavailable"),
    }
    println!("INFO power against jump size (b=50, k=10, R=100): {}", power_trend());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
