use std::f64::consts::PI;

use anyhow::{bail, Context};
use num_complex::Complex64;
use serde_json::{json, Value};

use orbitrep::construct::{represent_indicator, visit_spectrum_check, IntervalStream, PasteMode};
use orbitrep::counterexamples::{bad_open_set, block_pattern_pair, dyadic_flip_pair};
use orbitrep::empirical::{fmt_f64, spectrum, spectrum_distance, target_coeff, TargetSpectrum};
use orbitrep::rational::{atom_masses, represent_rational, ResidueTorus};
use orbitrep::rng::KeyedRng;
use orbitrep::thinning::{set_from_bounded_weight, thin, ThinningConfig};
use orbitrep::weights::{flatten, represent_density, sbp_average};
use orbitrep::{TorusPoint, Weight};

use crate::args::*;
use crate::output::{check, Artifacts, Check};

pub fn hex(p: TorusPoint) -> String {
    format!("{:#018x}", p.frac())
}

fn spectrum_series(sp: &orbitrep::Spectrum) -> Vec<(f64, f64)> {
    sp.iter().map(|(p, c)| (p as f64, c.norm())).collect()
}

pub fn run_spectrum(a: &SpectrumArgs, out: &mut Artifacts) -> anyhow::Result<Vec<Check>> {
    let o = &a.orbit;
    let set = parse_set(&o.set)?;
    let alpha = parse_point(&o.alpha).map_err(anyhow::Error::msg)?;
    let sp = spectrum(&set, alpha, o.n, o.pmax)?;
    out.csv(".csv", &sp.to_csv())?;
    out.json(".json", serde_json::to_value(&sp)?)?;
    out.plot(".svg", "|mu(p)| against p", &spectrum_series(&sp))?;
    println!("{}: {} elements up to N = {}", set.descriptor(), sp.count, o.n);
    let c0 = sp.coeff(0).unwrap_or_default();
    Ok(vec![check("normalization", (c0 - 1.0).norm() <= 1e-12, format!("mu(0) = {}", fmt_f64(c0.re)))])
}

pub fn run_visit(a: &VisitArgs, out: &mut Artifacts) -> anyhow::Result<Vec<Check>> {
    let o = &a.orbit;
    let set = parse_set(&o.set)?;
    let alpha = parse_point(&o.alpha).map_err(anyhow::Error::msg)?;
    let region = match &a.region_file {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            orbitrep::TorusRegion::parse_csv(&text)?
        }
        None => parse_region(&a.region)?,
    };
    let rep = visit_spectrum_check(&set, alpha, &region, o.n, o.pmax)?;
    let mut body = String::from("p,empirical_re,empirical_im,target_re,target_im,error\n");
    for r in &rep.rows {
        body.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.p,
            fmt_f64(r.empirical.re),
            fmt_f64(r.empirical.im),
            fmt_f64(r.target.re),
            fmt_f64(r.target.im),
            fmt_f64(r.error)
        ));
    }
    out.csv(".csv", &body)?;
    out.json(".json", serde_json::to_value(&rep)?)?;
    let trace: Vec<(f64, f64)> = rep.rows.iter().map(|r| (r.p as f64, r.error)).collect();
    out.plot(".svg", "coefficient error against p", &trace)?;
    println!(
        "relative density {:.6} (region measure {:.6}), max coefficient error {:.3e}",
        rep.relative_density, rep.region_measure, rep.max_error
    );
    Ok(vec![
        check(
            "density",
            (rep.relative_density - rep.region_measure).abs() < 2e-3,
            format!("|#S(N)/#R(N) - lambda(B)| = {:.3e} < 2e-3", (rep.relative_density - rep.region_measure).abs()),
        ),
        check("spectrum", rep.max_error < 2e-2, format!("max error {:.3e} < 2e-2", rep.max_error)),
    ])
}

fn paste_mode(s: &str) -> anyhow::Result<PasteMode> {
    match s {
        "truncate" => Ok(PasteMode::Truncate),
        "strict" => Ok(PasteMode::Strict),
        other => bail!("unknown paste mode {other:?}"),
    }
}

pub fn run_represent(a: &RepresentArgs, out: &mut Artifacts) -> anyhow::Result<Vec<Check>> {
    let o = &a.orbit;
    let set = parse_set(&o.set)?;
    let alpha = parse_point(&o.alpha).map_err(anyhow::Error::msg)?;
    let stream = match (&a.stream_file, a.stream.as_str()) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            IntervalStream::parse_csv(&text)?
        }
        (None, "rational") => IntervalStream::rational_neighborhoods(),
        (None, inline) => IntervalStream::parse_csv(&inline_csv(inline))?,
    };
    let rep = represent_indicator(&set, alpha, &stream, a.pieces, o.n, o.pmax, paste_mode(&a.mode)?)?;
    out.csv(".csv", &rep.report.spectrum.to_csv())?;
    out.json(".json", json!({ "report": rep.report, "schedule": rep.schedule }))?;
    out.plot(".svg", "|mu(p)| against p", &spectrum_series(&rep.report.spectrum))?;
    let gap = (rep.report.relative_density - rep.report.target_measure).abs();
    println!(
        "{} blocks, relative density {:.6} (target {:.6}), spectrum error {:.3e}",
        rep.schedule.blocks(),
        rep.report.relative_density,
        rep.report.target_measure,
        rep.report.spectrum_error
    );
    Ok(vec![
        check("density", gap < 1e-2, format!("|density - lambda(B)| = {gap:.3e} < 1e-2")),
        check(
            "spectrum",
            rep.report.spectrum_error < 2e-2,
            format!("spectrum error {:.3e} < 2e-2", rep.report.spectrum_error),
        ),
        check("certificates", rep.schedule.certificates_hold(), "pasting certificates hold"),
    ])
}

fn trace_series(trace: &[(u64, f64)]) -> Vec<(f64, f64)> {
    trace.iter().map(|&(n, m)| ((n as f64).log10(), m)).collect()
}

pub fn run_represent_weight(a: &WeightArgs, out: &mut Artifacts) -> anyhow::Result<Vec<Check>> {
    let o = &a.orbit;
    let set = parse_set(&o.set)?;
    let alpha = parse_point(&o.alpha).map_err(anyhow::Error::msg)?;
    let rho = parse_density(&a.density)?;
    let rep = represent_density(&rho, &set, alpha, o.n, o.pmax, a.members)?;
    out.csv(".csv", &rep.report.spectrum.to_csv())?;
    if a.weights_csv {
        out.csv(".weights.csv", &rep.pasted.weight.to_csv(o.n)?)?;
    }
    out.json(".json", json!({ "report": rep.report, "schedule": rep.pasted.schedule }))?;
    out.plot(".svg", "weight mean against log10 N", &trace_series(&rep.report.mean_trace))?;
    let last = rep.report.mean_trace.last().map(|t| t.1).unwrap_or(f64::NAN);
    let gap = (last - rep.report.target_mass).abs();
    println!(
        "{} blocks, mean {:.6} (target {:.6}), spectrum error {:.3e}",
        rep.pasted.schedule.blocks(),
        last,
        rep.report.target_mass,
        rep.report.spectrum_error
    );
    Ok(vec![
        check("mean", gap < 1e-2, format!("|mean - integral| = {gap:.3e} < 1e-2")),
        check(
            "spectrum",
            rep.report.spectrum_error < 2e-2,
            format!("spectrum error {:.3e} < 2e-2", rep.report.spectrum_error),
        ),
    ])
}

pub fn run_flatten(a: &WeightArgs, out: &mut Artifacts) -> anyhow::Result<Vec<Check>> {
    let o = &a.orbit;
    let set = parse_set(&o.set)?;
    let alpha = parse_point(&o.alpha).map_err(anyhow::Error::msg)?;
    let rho = parse_density(&a.density)?;
    let rep = represent_density(&rho, &set, alpha, o.n, o.pmax, a.members)?;
    let flat = flatten(&rep.pasted, o.n)?;
    let sp = spectrum(&flat.weight, alpha, o.n, o.pmax)?;
    let distance = spectrum_distance(&sp, &rep.report.spectrum)?;
    let sup = flat.weight.scan_sup(o.n);
    out.csv(".csv", &sp.to_csv())?;
    if a.weights_csv {
        out.csv(".weights.csv", &flat.weight.to_csv(o.n)?)?;
    }
    out.json(
        ".json",
        json!({
            "sigma": flat.sigma,
            "growth": flat.growth,
            "stretched": flat.stretched,
            "schedule": flat.schedule,
            "sup": sup,
            "spectrum_distance": distance,
            "spectrum": sp,
        }),
    )?;
    out.plot(".svg", "|mu(p)| of the flattened weight", &spectrum_series(&sp))?;
    println!(
        "{} blocks, sup {:.6}, distance to the unflattened spectrum {:.3e}",
        flat.schedule.blocks(),
        sup,
        distance
    );
    Ok(vec![
        check("bounded", sup <= 1.0, format!("sup of the flattened weight {sup:.6} <= 1")),
        check("growth", flat.growth.iter().all(|g| g.holds), "growth criterion holds on every block"),
        check("spectrum", distance < 2e-2, format!("distance {distance:.3e} < 2e-2")),
    ])
}

pub fn run_thin(a: &ThinArgs, out: &mut Artifacts) -> anyhow::Result<Vec<Check>> {
    let o = &a.orbit;
    let set = parse_set(&o.set)?;
    let alpha = parse_point(&o.alpha).map_err(anyhow::Error::msg)?;
    let seeds = parse_seeds(&a.seeds).map_err(anyhow::Error::msg)?;
    let checkpoints = parse_list(&a.checkpoints).map_err(anyhow::Error::msg)?;
    let config = |seed: u64, cps: Vec<u64>| ThinningConfig {
        grid_multiplier: a.grid_multiplier,
        grid_cap: a.grid_cap as usize,
        ..ThinningConfig::new(seed, cps)
    };

    if let Some(spec) = &a.density {
        let rho = parse_density(spec)?;
        let rep = represent_density(&rho, &set, alpha, o.n, o.pmax.max(1), a.members)?;
        let flat = flatten(&rep.pasted, o.n)?;
        let cps: Vec<u64> = checkpoints.iter().copied().filter(|&c| c < o.n).collect();
        let (_, report) = set_from_bounded_weight(&flat.weight, alpha, &config(seeds[0], cps), o.n, o.pmax.max(1), a.probes)?;
        let mass = rho.integral();
        let target = target_coeff(
            &TargetSpectrum::Density {
                density: rho.scaled(1.0 / mass),
            },
            1,
        );
        let err = (report.spectrum.coeff(1).unwrap_or_default() - target).norm();
        out.csv(".csv", &report.spectrum.to_csv())?;
        out.json(".json", serde_json::to_value(&report)?)?;
        out.plot(".svg", "|mu(p)| of the thinned set", &spectrum_series(&report.spectrum))?;
        println!(
            "selected {} of N = {}, |mu(1) - target| = {err:.3e}, certificate ratio {:.3}",
            report.selected,
            o.n,
            report.certificate.max_ratio()
        );
        return Ok(vec![
            check("spectrum", err < 3e-2, format!("|mu_S(e1) - target| = {err:.3e} < 3e-2")),
            check("certificate", report.certificate.holds(), format!("max ratio {:.3}", report.certificate.max_ratio())),
        ]);
    }

    let c = match a.weight.strip_prefix("const:") {
        Some(v) => v.parse::<f64>().map_err(|_| anyhow::anyhow!("bad constant {v:?}"))?,
        None => bail!("weight must be const:C"),
    };
    if !(0.0..=1.0).contains(&c) {
        bail!("selection probability {c} outside [0, 1]");
    }
    let sigma = Weight::constant(set, c);
    let mut body = String::from("seed,n,grid_size,capped,selected,mass,max_deviation,normalizer,ratio\n");
    let mut certs = Vec::new();
    let mut worst = 0.0f64;
    let mut all = true;
    for &seed in &seeds {
        let (_, cert) = thin(&sigma, &config(seed, checkpoints.clone()))?;
        for cp in &cert.checkpoints {
            body.push_str(&format!(
                "{seed},{},{},{},{},{},{},{},{}\n",
                cp.n,
                cp.grid_size,
                cp.capped,
                cp.selected,
                fmt_f64(cp.mass),
                fmt_f64(cp.max_deviation),
                fmt_f64(cp.normalizer),
                fmt_f64(cp.ratio)
            ));
            all &= cp.ratio <= 13.0 && !cp.capped;
        }
        worst = worst.max(cert.max_ratio());
        certs.push(cert);
    }
    out.csv(".csv", &body)?;
    out.json(".json", serde_json::to_value(&certs)?)?;
    let series: Vec<(f64, f64)> = certs
        .iter()
        .map(|c| (c.seed as f64, c.max_ratio()))
        .collect();
    out.plot(".svg", "largest certificate ratio against seed", &series)?;
    println!("{} seeds, largest ratio {worst:.3}", seeds.len());
    Ok(vec![check("certificate", all, format!("every ratio <= 13 on an uncapped grid; largest {worst:.3}"))])
}

pub fn run_sbp(a: &SbpArgs, out: &mut Artifacts) -> anyhow::Result<Vec<Check>> {
    let rng = KeyedRng::new(a.seed);
    let n = a.n;
    let mut body = String::from("instance,relative_difference,mass_relative_difference\n");
    let (mut worst, mut worst_mass) = (0.0f64, 0.0f64);
    for inst in 0..a.instances {
        let r = rng.split(inst);
        let w: Vec<f64> = (0..n).map(|i| 0.01 + r.uniform(3 * i)).collect();
        let mut sigma: Vec<f64> = (0..n).map(|i| r.uniform(3 * i + 1)).collect();
        sigma.sort_by(|x, y| y.total_cmp(x));
        let x: Vec<Complex64> = (0..n)
            .map(|i| Complex64::from_polar(1.0, 2.0 * PI * r.uniform(3 * i + 2)))
            .collect();
        let rep = sbp_average(&w, &sigma, &x)?;
        body.push_str(&format!(
            "{inst},{},{}\n",
            fmt_f64(rep.relative_difference),
            fmt_f64(rep.mass_relative_difference)
        ));
        worst = worst.max(rep.relative_difference);
        worst_mass = worst_mass.max(rep.mass_relative_difference);
    }
    out.csv(".csv", &body)?;
    out.json(".json", json!({ "instances": a.instances, "max_relative_difference": worst, "max_mass_relative_difference": worst_mass }))?;
    println!("{} instances, largest relative difference {worst:.3e}, mass {worst_mass:.3e}", a.instances);
    Ok(vec![
        check("identity", worst <= 1e-12, format!("{worst:.3e} <= 1e-12")),
        check("mass", worst_mass <= 1e-12, format!("{worst_mass:.3e} <= 1e-12")),
    ])
}

pub fn run_rational(a: &RationalArgs, out: &mut Artifacts) -> anyhow::Result<Vec<Check>> {
    let nu = ResidueTorus::parse(&a.nu)?;
    if nu.q() != a.q {
        bail!("--nu has {} masses but q = {}", nu.q(), a.q);
    }
    let gamma = parse_point(&a.gamma).map_err(anyhow::Error::msg)?;
    let rep = represent_rational(a.a, &nu, gamma)?;
    let masses = atom_masses(&rep.set, a.a, a.q, a.n)?;
    let density = rep.set.count(a.n) as f64 / a.n as f64;
    let mut body = String::from("j,target,empirical\n");
    for (j, (t, m)) in nu.masses().iter().zip(&masses).enumerate() {
        body.push_str(&format!("{j},{},{}\n", fmt_f64(*t), fmt_f64(*m)));
    }
    out.csv(".csv", &body)?;
    out.json(
        ".json",
        json!({ "masses": masses, "target": nu.masses(), "density": density, "residues": rep.residues }),
    )?;
    let series: Vec<(f64, f64)> = masses.iter().enumerate().map(|(j, &m)| (j as f64, m)).collect();
    out.plot(".svg", "atom masses against j", &series)?;
    let worst = masses
        .iter()
        .zip(nu.masses())
        .map(|(m, t)| (m - t).abs())
        .fold(0.0, f64::max);
    let gap = (density - 1.0 / a.q as f64).abs();
    println!("masses {masses:.5?}, density {density:.6}");
    Ok(vec![
        check("masses", worst < 5e-3, format!("largest mass error {worst:.3e} < 5e-3")),
        check("density", gap < 5e-3, format!("|density - 1/q| = {gap:.3e} < 5e-3")),
    ])
}

pub fn run_dyadic(a: &DyadicArgs, out: &mut Artifacts) -> anyhow::Result<Vec<Check>> {
    let rep = dyadic_flip_pair(a.seed, a.n)?.report;
    out.csv(".csv", &rep.to_csv())?;
    out.json(".json", serde_json::to_value(&rep)?)?;
    let series: Vec<(f64, f64)> = rep.blocks.iter().map(|b| (b.k as f64, b.intersection_mean)).collect();
    out.plot(".svg", "intersection block mean against k", &series)?;
    let even: Vec<f64> = rep
        .blocks
        .iter()
        .filter(|b| (14..=18).contains(&b.k) && b.k % 2 == 0)
        .map(|b| (b.intersection_mean - 0.5).abs())
        .collect();
    let worst = even.iter().copied().fold(0.0, f64::max);
    println!("densities R {:.5}, S {:.5}", rep.r_density, rep.s_density);
    let mut checks = vec![check("odd blocks", rep.odd_blocks_empty(), "odd-k intersection blocks are empty")];
    checks.push(if even.len() == 3 {
        check("even blocks", worst < 0.02, format!("even k in 14..18 within {worst:.4} of 1/2 (< 0.02)"))
    } else {
        check("even blocks", false, "horizon too small to reach block k = 18")
    });
    Ok(checks)
}

pub fn run_blocks(a: &BlocksArgs, out: &mut Artifacts) -> anyhow::Result<Vec<Check>> {
    let rep = block_pattern_pair(a.kmax)?.report;
    out.csv(".csv", &rep.to_csv())?;
    out.json(".json", serde_json::to_value(&rep)?)?;
    let series: Vec<(f64, f64)> = rep.rows.iter().map(|r| (r.k as f64, r.intersection_average)).collect();
    out.plot(".svg", "intersection average of e(n/2) against k", &series)?;
    let patterns = rep.intersection_even == "EOE"
        && rep.intersection_odd == "OOE"
        && rep.union_even == "NON"
        && rep.union_odd == "NNE";
    let rows: Vec<_> = rep.rows.iter().filter(|r| (8..=12).contains(&r.k)).collect();
    let sign = |k: u32| if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    let wi = rows
        .iter()
        .map(|r| (r.intersection_average - sign(r.k) / 3.0).abs())
        .fold(0.0, f64::max);
    let wu = rows
        .iter()
        .map(|r| (r.union_average + sign(r.k) / 5.0).abs())
        .fold(0.0, f64::max);
    println!(
        "intersection {}/{}, union {}/{}, density of the intersection {:.5}",
        rep.intersection_even, rep.intersection_odd, rep.union_even, rep.union_odd, rep.intersection_density
    );
    let full = rows.len() == 5;
    Ok(vec![
        check("patterns", patterns, "EOE/OOE for the intersection, NON/NNE for the union"),
        check(
            "intersection",
            full && wi < 0.05,
            format!("k = 8..12 within {wi:.4} of +/-1/3 (< 0.05)"),
        ),
        check("union", full && wu < 0.05, format!("k = 8..12 within {wu:.4} of -/+1/5 (< 0.05)")),
        check(
            "density",
            a.kmax >= 12 && (rep.intersection_density - 0.5).abs() < 0.02,
            format!("density at 3^{} is {:.5}", a.kmax + 1, rep.intersection_density),
        ),
    ])
}

pub fn run_open_set(a: &OpenSetArgs, out: &mut Artifacts) -> anyhow::Result<Vec<Check>> {
    let alpha = parse_point(&a.alpha).map_err(anyhow::Error::msg)?;
    let (_, rep) = bad_open_set(alpha, a.n0, a.steps, a.cap)?;
    out.csv(".csv", &rep.to_csv())?;
    out.json(".json", serde_json::to_value(&rep)?)?;
    let series: Vec<(f64, f64)> = rep.checkpoints.iter().map(|c| (c.k as f64, c.average)).collect();
    out.plot(".svg", "visit average at N_k against k", &series)?;
    for c in &rep.checkpoints {
        println!("k = {}, N_k = {}, average {:.4}", c.k, c.n_k, c.average);
    }
    Ok(vec![
        check("disjoint", rep.parity_disjoint && rep.balls_disjoint, "parity families and new balls are disjoint"),
        check("measure", rep.measure_bounds_hold, "measure bounds hold"),
        check(
            "averages",
            rep.checkpoints.iter().all(|c| c.holds),
            "even checkpoints >= 5/6, odd checkpoints <= 1/3",
        ),
    ])
}

/// Rotations used by a command, for the embedded configuration.
pub fn rotations(cmd: &Command) -> Vec<(&'static str, String)> {
    let p = |s: &str| parse_point(s).map(hex).unwrap_or_default();
    match cmd {
        Command::Spectrum(a) => vec![("alpha_hex", p(&a.orbit.alpha))],
        Command::Visit(a) => vec![("alpha_hex", p(&a.orbit.alpha))],
        Command::Represent(a) => vec![("alpha_hex", p(&a.orbit.alpha))],
        Command::RepresentWeight(a) | Command::Flatten(a) => vec![("alpha_hex", p(&a.orbit.alpha))],
        Command::Thin(a) => vec![("alpha_hex", p(&a.orbit.alpha))],
        Command::Rational(a) => vec![("gamma_hex", p(&a.gamma))],
        Command::Counterexample(crate::args::Counterexample::OpenSet(a)) => vec![("alpha_hex", p(&a.alpha))],
        _ => vec![],
    }
}

pub fn dispatch(cmd: &Command, out: &mut Artifacts) -> anyhow::Result<Vec<Check>> {
    use crate::args::Counterexample as C;
    match cmd {
        Command::Spectrum(a) => run_spectrum(a, out),
        Command::Visit(a) => run_visit(a, out),
        Command::Represent(a) => run_represent(a, out),
        Command::RepresentWeight(a) => run_represent_weight(a, out),
        Command::Flatten(a) => run_flatten(a, out),
        Command::Thin(a) => run_thin(a, out),
        Command::SbpCheck(a) => run_sbp(a, out),
        Command::Rational(a) => run_rational(a, out),
        Command::Counterexample(C::Dyadic(a)) => run_dyadic(a, out),
        Command::Counterexample(C::Blocks(a)) => run_blocks(a, out),
        Command::Counterexample(C::OpenSet(a)) => run_open_set(a, out),
    }
}

pub fn config_value(cmd: &Command) -> Value {
    match serde_json::to_value(cmd) {
        Ok(Value::Object(map)) if map.len() == 1 => {
            let inner = map.into_iter().next().expect("one entry").1;
            match inner {
                // nested counterexample variants
                Value::Object(m) if m.len() == 1 && m.values().all(Value::is_object) => {
                    m.into_iter().next().expect("one entry").1
                }
                v => v,
            }
        }
        Ok(v) => v,
        Err(_) => Value::Null,
    }
}
