use std::path::Path;
use std::time::Instant;

use rkld_core::dist::{parse_samples, DistSpec};
use rkld_core::extremal::{envelope_rows, kl_ball_demo, sup_over_ball, tv_ball_demo};
use rkld_core::uht::{estimate_exponents, ExponentReport, Hypothesis};
use rkld_core::{decide, empirical_from_samples, levy_distance, robust_kld, robust_statistic, Cdf, DetectorConfig, LevyBall, Verdict};
use serde::Serialize;
use serde_json::json;

use crate::report::{csv, emit, render, RunManifest};
use crate::{BallArgs, DemoCommand, EnvelopeArgs, Failure, LevyArgs, OutArgs, RkldArgs, SimulateArgs, SupballArgs, TestArgs};

type Outcome = Result<u8, Failure>;

const SEED_ENV: &str = "RKLD_SEED";

/// Parses a distribution given inline (`{...}`) or as a JSON file.
fn load_spec(arg: &str, manifest: &mut RunManifest) -> Result<(DistSpec, Cdf), Failure> {
    let text = if arg.trim_start().starts_with('{') { arg.to_string() } else { manifest.read_input(arg)? };
    let spec: DistSpec = serde_json::from_str(&text).map_err(|e| Failure::usage(format!("bad distribution spec {arg:?}: {e}")))?;
    let cdf = spec.build()?;
    Ok((spec, cdf))
}

fn load_ball(args: &BallArgs, manifest: &mut RunManifest) -> Result<(DistSpec, LevyBall), Failure> {
    manifest.flag("nominal", &args.nominal).flag("radius", args.radius);
    let (spec, cdf) = load_spec(&args.nominal, manifest)?;
    Ok((spec, LevyBall::new(cdf, args.radius)?))
}

fn load_samples(path: &Path, manifest: &mut RunManifest) -> Result<Vec<f64>, Failure> {
    let name = path.display().to_string();
    manifest.flag("samples", &name);
    let text = manifest.read_input(&name)?;
    Ok(parse_samples(&text)?)
}

fn finish(body: impl Serialize, mut manifest: RunManifest, out: &OutArgs) -> Result<(), Failure> {
    if let Some(p) = &out.out {
        manifest.outputs.push(p.display().to_string());
    }
    emit(&render(body, &manifest)?, out.out.as_deref())
}

fn csv_with_manifest(manifest: &RunManifest, header: &[&str], rows: Vec<Vec<f64>>) -> Result<String, Failure> {
    let line = serde_json::to_string(manifest).map_err(Failure::internal)?;
    Ok(format!("# manifest {line}\n{}", csv(header, rows)))
}

pub fn levy(a: LevyArgs) -> Outcome {
    let mut m = RunManifest::new("levy");
    m.flag("left", &a.left).flag("right", &a.right);
    let (_, f) = load_spec(&a.left, &mut m)?;
    let (_, g) = load_spec(&a.right, &mut m)?;
    // Bisection resolves the distance to 1e-11; report it on a 1e-9 grid.
    let distance = (levy_distance(&f, &g) * 1e9).round() / 1e9;
    finish(json!({ "distance": distance }), m, &a.out)?;
    Ok(0)
}

pub fn rkld(a: RkldArgs) -> Outcome {
    let mut m = RunManifest::new("rkld");
    let samples = load_samples(&a.samples, &mut m)?;
    let (_, ball) = load_ball(&a.ball, &mut m)?;
    let mu = empirical_from_samples(&samples)?;
    let sol = robust_kld(&mu, &ball);
    if let Some(path) = &a.csv {
        m.outputs.push(path.display().to_string());
        let rows = mu.atoms().iter().zip(&sol.partial_sums).zip(&sol.masses).map(|((&x, &(lo, hi)), &p)| vec![x, lo, hi, p]).collect();
        let text = csv_with_manifest(&m, &["atom", "a", "b", "p"], rows)?;
        emit(&text, Some(path))?;
    }
    let converged = sol.converged;
    let mut body = serde_json::to_value(&sol).map_err(Failure::internal)?;
    body["atoms"] = json!(mu.atoms());
    finish(body, m, &a.out)?;
    if converged {
        Ok(0)
    } else {
        Err(Failure { code: 3, message: "solver did not converge; report written with converged=false".into() })
    }
}

pub fn test(a: TestArgs) -> Outcome {
    let mut m = RunManifest::new("test");
    let samples = load_samples(&a.samples, &mut m)?;
    m.flag("threshold", a.threshold);
    let (_, ball) = load_ball(&a.ball, &mut m)?;
    let config = DetectorConfig::new(ball.center().clone(), ball.radius(), a.threshold)?;
    let decision = decide(robust_statistic(&samples, &config)?, a.threshold);
    finish(decision, m, &a.out)?;
    Ok(match decision.verdict {
        Verdict::H0 => 0,
        Verdict::H1 => 1,
    })
}

#[derive(Serialize)]
struct RateSummary {
    errors: Vec<usize>,
    rates: Vec<f64>,
    exponents: Vec<Option<f64>>,
    exponent_lower_bounds: Vec<Option<f64>>,
    slope: Option<f64>,
}

impl From<&ExponentReport> for RateSummary {
    fn from(r: &ExponentReport) -> Self {
        Self {
            errors: r.points.iter().map(|p| p.errors).collect(),
            rates: r.rates(),
            exponents: r.points.iter().map(|p| p.exponent).collect(),
            exponent_lower_bounds: r.points.iter().map(|p| p.exponent_lower_bound).collect(),
            slope: r.slope,
        }
    }
}

pub fn simulate(a: SimulateArgs) -> Outcome {
    let started = Instant::now();
    let mut m = RunManifest::new("simulate");
    let seed = match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse::<u64>().map_err(|_| Failure::usage(format!("{SEED_ENV} must be an unsigned integer, got {v:?}")))?,
        Err(_) => a.seed,
    };
    let n_text: Vec<String> = a.n.iter().map(usize::to_string).collect();
    m.flag("threshold", a.threshold).flag("alt", &a.alt).flag("n", n_text.join(",")).flag("trials", a.trials).flag("seed", seed);
    if a.timing {
        m.flag("timing", true);
    }
    let (nominal_spec, ball) = load_ball(&a.ball, &mut m)?;
    let (alt_spec, alt) = load_spec(&a.alt, &mut m)?;
    let config = DetectorConfig::new(ball.center().clone(), ball.radius(), a.threshold)?;

    let type_i = estimate_exponents(&config, config.nominal(), Hypothesis::H0, &a.n, a.trials, seed, a.workers)?;
    let type_ii = estimate_exponents(&config, &alt, Hypothesis::H1, &a.n, a.trials, seed, a.workers)?;
    let mut body = json!({
        "config": { "nominal": nominal_spec, "radius": a.ball.radius, "threshold": a.threshold, "alt": alt_spec },
        "n": a.n,
        "trials": a.trials,
        "seed": seed,
        "type_i": RateSummary::from(&type_i),
        "type_ii": RateSummary::from(&type_ii),
    });
    if a.timing {
        body["runtime_ms"] = json!(started.elapsed().as_millis() as u64);
    }
    finish(body, m, &a.out)?;
    Ok(0)
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::usage(format!("grid must be lo:hi:step with lo <= hi and step > 0, got {spec:?}"));
    let parts: Vec<f64> = spec.split(':').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    let [lo, hi, step] = parts[..] else { return Err(bad()) };
    if !(lo <= hi && step > 0.0 && lo.is_finite() && hi.is_finite()) {
        return Err(bad());
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    if count > 10_000_000 {
        return Err(Failure::usage("grid has more than 1e7 points"));
    }
    Ok((0..=count).map(|k| lo + k as f64 * step).collect())
}

pub fn envelope(a: EnvelopeArgs) -> Outcome {
    let mut m = RunManifest::new("envelope");
    let grid = match &a.grid {
        Some(g) => {
            m.flag("grid", g);
            parse_grid(g)?
        }
        None if !a.t.is_empty() => {
            let t: Vec<String> = a.t.iter().map(f64::to_string).collect();
            m.flag("t", t.join(","));
            a.t.clone()
        }
        None => return Err(Failure::usage("give either --grid lo:hi:step or --t points")),
    };
    let (_, ball) = load_ball(&a.ball, &mut m)?;
    if let Some(p) = &a.out.out {
        m.outputs.push(p.display().to_string());
    }
    let rows = envelope_rows(&ball, &grid).into_iter().map(|r| vec![r.t, r.lower, r.upper, r.center]).collect();
    emit(&csv_with_manifest(&m, &["t", "lower", "upper", "center"], rows)?, a.out.out.as_deref())?;
    Ok(0)
}

pub fn supball(a: SupballArgs) -> Outcome {
    let mut m = RunManifest::new("supball");
    m.flag("base", &a.base).flag("delta", a.delta);
    if !a.grid.is_empty() {
        let g: Vec<String> = a.grid.iter().map(f64::to_string).collect();
        m.flag("grid", g.join(","));
    }
    let (_, base) = load_spec(&a.base, &mut m)?;
    let base = base.as_step().cloned().ok_or_else(|| Failure::usage("--base must be a discrete distribution"))?;
    let (_, ball) = load_ball(&a.ball, &mut m)?;
    let report = sup_over_ball(&base, a.delta, &ball, &a.grid)?;
    let base_value = robust_kld(&base, &ball).value;
    finish(json!({ "sup": report, "base_value": base_value }), m, &a.out)?;
    Ok(0)
}

pub fn demo(d: DemoCommand) -> Outcome {
    match d {
        DemoCommand::Tv { ball, n, out } => {
            let mut m = RunManifest::new("demo tv");
            m.flag("n", n);
            let (_, b) = load_ball(&ball, &mut m)?;
            let result = tv_ball_demo(b.center(), b.radius(), n)?;
            finish(result, m, &out)?;
        }
        DemoCommand::Kl { nominal, n, out } => {
            let mut m = RunManifest::new("demo kl");
            m.flag("nominal", &nominal).flag("n", n);
            let (_, p0) = load_spec(&nominal, &mut m)?;
            let result = kl_ball_demo(&p0, n)?;
            finish(result, m, &out)?;
        }
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("0:1:0.5").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("-1:-1:1").unwrap(), vec![-1.0]);
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }
}
