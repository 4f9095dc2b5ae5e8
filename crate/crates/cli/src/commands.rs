use std::io::Write;

use rayon::prelude::*;
use wreathmix_core::distances::{level_law, u_level_mass};
use wreathmix_core::exact;
use wreathmix_core::group::DEFAULT_ENUMERATION_CAP;
use wreathmix_core::occupancy::{mu_subsets, OccupancyChain};
use wreathmix_core::oracle::{mixture_certify, plug_in_tv, simulate_chain, OracleConfig};
use wreathmix_core::profiles::{
    chi2_profile, f_profile, h_inf, h_profile, h_q, sep_profile, SeriesControl,
};
use wreathmix_core::{
    DistanceReport, GroupParams, LinftyLimit, MixtureSpec, OccupancyWeights, ProfilePoint,
    SamplingParams,
};

use crate::format::{g, rational};
use crate::{
    ExactArgs, Failure, OccupancyArgs, OracleArgs, ProfileArgs, SimulateArgs, BUDGET_ENV,
    EXIT_BUDGET, EXIT_CERTIFY,
};

/// Default cap on the bit length of the occupancy denominator.
pub const DEFAULT_MAX_BITS: u64 = 1 << 21;

/// Rows computed together before being written.
const BATCH: usize = 64;

type Out = Box<dyn Write>;

fn writer(out: Out) -> csv::Writer<Out> {
    csv::WriterBuilder::new().from_writer(out)
}

/// `c_min, c_min + step, …` up to `c_max`, tolerating rounding at the end.
pub fn c_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>, Failure> {
    if !(min.is_finite() && max.is_finite() && step.is_finite()) {
        return Err(Failure::usage("c range must be finite"));
    }
    if step <= 0.0 {
        return Err(Failure::usage(format!("--c-step must be positive, got {step}")));
    }
    if max < min {
        return Err(Failure::usage(format!("empty c range: {min} > {max}")));
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| min + i as f64 * step).collect())
}

pub fn profile(args: &ProfileArgs, out: Out) -> Result<(), Failure> {
    if args.p == 0 {
        return Err(Failure::usage("--p must be positive"));
    }
    if let Some(q) = args.q.iter().find(|q| !(**q >= 1.0 && q.is_finite())) {
        return Err(Failure::usage(format!("--q values must be finite and >= 1, got {q}")));
    }
    let grid = c_grid(args.c_min, args.c_max, args.c_step)?;
    let ctrl = SeriesControl {
        tol: args.tol,
        ..SeriesControl::default()
    };
    let p = args.p;
    let rows = grid
        .par_iter()
        .map(|&c| -> wreathmix_core::Result<Vec<String>> {
            let pt = ProfilePoint::new(c, p)?;
            let mut row = vec![
                g(c),
                g(pt.lambda),
                g(pt.r),
                pt.w_star.to_string(),
                g(f_profile(c, p)?),
                g(sep_profile(c, p)?),
                g(chi2_profile(c, p)?),
                g(h_profile(c, p, ctrl)?),
            ];
            for &q in &args.q {
                row.push(g(h_q(c, p, q, ctrl)?));
            }
            row.push(match h_inf(c, p)? {
                LinftyLimit::Finite(v) => g(v),
                LinftyLimit::Infinite => String::new(),
            });
            Ok(row)
        })
        .collect::<wreathmix_core::Result<Vec<_>>>()?;

    let mut w = writer(out);
    let mut header: Vec<String> = ["c", "lambda", "r", "w_star", "f_p", "s_p", "g_p", "h_p"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(args.q.iter().map(|q| format!("H_{}", g(*q))));
    header.push("H_inf".into());
    w.write_record(&header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn distance_row(k: usize, d: &DistanceReport, exact_strings: bool) -> Vec<String> {
    let mut row = vec![
        k.to_string(),
        rational(&d.tv, exact_strings),
        rational(&d.sep, exact_strings),
        rational(&d.linfty, exact_strings),
        rational(&d.chi2, exact_strings),
        g(d.kl),
    ];
    row.extend(d.lq.iter().map(|v| g(v.value)));
    row.push(d.w_mu.map(|w| w.to_string()).unwrap_or_default());
    row
}

fn over_budget(mu: &OccupancyWeights, max_bits: u64) -> bool {
    mu.denominator().bits() > max_bits
}

fn budget_failure(k: usize, max_bits: u64) -> Failure {
    Failure {
        code: EXIT_BUDGET,
        message: format!(
            "warning: occupancy denominator exceeds {max_bits} bits at k={k}; output is partial"
        ),
    }
}

pub fn exact(args: &ExactArgs, out: Out) -> Result<(), Failure> {
    let group = GroupParams::new(args.n, args.p)?;
    SamplingParams::new(args.n, args.m, 0)?;
    if let Some(q) = args.q.iter().find(|q| !(**q >= 1.0 && q.is_finite())) {
        return Err(Failure::usage(format!("--q values must be finite and >= 1, got {q}")));
    }
    if let Some(eps) = args.eps {
        return sep_scan(args, group, eps, out);
    }
    let (k_min, k_max) = match (args.k, args.k_max) {
        (Some(k), _) => (k, k),
        (None, Some(k_max)) => (args.k_min, k_max),
        (None, None) => return Err(Failure::usage("give --k or --k-max")),
    };
    if k_max < k_min {
        return Err(Failure::usage(format!("empty k range: {k_min} > {k_max}")));
    }

    let mut w = writer(out);
    let mut header: Vec<String> = ["k", "tv", "sep", "linfty", "chi2", "kl"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(args.q.iter().map(|q| format!("lq_{}", g(*q))));
    header.push("w_mu".into());
    w.write_record(&header)?;

    let mut chain = OccupancyChain::new(args.n, args.m)?;
    let mut batch: Vec<(usize, MixtureSpec)> = Vec::with_capacity(BATCH);
    let mut stopped = None;
    for k in 0..=k_max {
        if k > 0 {
            chain.advance();
        }
        if over_budget(chain.current(), args.max_bits) {
            stopped = Some(k);
            break;
        }
        if k >= k_min {
            batch.push((k, MixtureSpec::new(group, chain.current().clone())?));
        }
        if batch.len() == BATCH || k == k_max {
            write_distance_batch(&mut w, &batch, &args.q, args.exact_rationals)?;
            batch.clear();
        }
    }
    write_distance_batch(&mut w, &batch, &args.q, args.exact_rationals)?;
    w.flush()?;
    match stopped {
        Some(k) => Err(budget_failure(k, args.max_bits)),
        None => Ok(()),
    }
}

fn write_distance_batch(
    w: &mut csv::Writer<Out>,
    batch: &[(usize, MixtureSpec)],
    qs: &[f64],
    exact_strings: bool,
) -> Result<(), Failure> {
    let rows = batch
        .par_iter()
        .map(|(k, spec)| Ok(distance_row(*k, &DistanceReport::compute(spec, qs)?, exact_strings)))
        .collect::<wreathmix_core::Result<Vec<_>>>()?;
    for row in rows {
        w.write_record(&row)?;
    }
    Ok(())
}

/// First `k` with exact separation at most `eps`, next to the leading-order
/// prediction. Separation is nonincreasing in `k`, so the scan stops there.
fn sep_scan(args: &ExactArgs, group: GroupParams, eps: f64, out: Out) -> Result<(), Failure> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Failure::usage(format!("--eps must lie in (0, 1), got {eps}")));
    }
    let predicted = wreathmix_core::profiles::sep_mixing_time(eps, args.n, args.m, args.p).ok();
    let mut chain = OccupancyChain::new(args.n, args.m)?;
    let mut k = 0;
    let found = loop {
        if over_budget(chain.current(), args.max_bits) {
            break None;
        }
        let spec = MixtureSpec::new(group, chain.current().clone())?;
        let sep = wreathmix_core::distances::sep_exact(&spec);
        if exact::to_f64(&sep) <= eps {
            break Some((k, sep));
        }
        chain.advance();
        k += 1;
    };
    let mut w = writer(out);
    w.write_record(["n", "p", "m", "eps", "k_exact", "sep_at_k", "k_predicted"])?;
    let mut row = vec![args.n.to_string(), args.p.to_string(), args.m.to_string(), g(eps)];
    match &found {
        Some((k, sep)) => {
            row.push(k.to_string());
            row.push(rational(sep, args.exact_rationals));
        }
        None => row.extend([String::new(), String::new()]),
    }
    row.push(predicted.map(g).unwrap_or_default());
    w.write_record(&row)?;
    w.flush()?;
    match found {
        Some(_) => Ok(()),
        None => Err(budget_failure(k, args.max_bits)),
    }
}

pub fn occupancy(args: &OccupancyArgs, out: Out) -> Result<(), Failure> {
    let mu = mu_subsets(SamplingParams::new(args.n, args.m, args.k)?)?;
    let mut w = writer(out);
    w.write_record(["a", "mu", "u", "P(u)"])?;
    for (a, weight) in mu.weights().iter().enumerate() {
        let cell = rational(weight, args.exact_rationals);
        w.write_record([a.to_string(), cell.clone(), (args.n - a).to_string(), cell])?;
    }
    w.flush()?;
    Ok(())
}

fn enumeration_cap() -> Result<u128, Failure> {
    match std::env::var(BUDGET_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::usage(format!("{BUDGET_ENV} must be a nonnegative integer, got {v:?}"))),
        Err(_) => Ok(DEFAULT_ENUMERATION_CAP),
    }
}

pub fn oracle_check(args: &OracleArgs, out: Out) -> Result<(), Failure> {
    let group = GroupParams::new(args.n, args.p)?;
    let config = OracleConfig {
        enumeration_cap: enumeration_cap()?,
        ..OracleConfig::default()
    };
    let report = mixture_certify(group, args.m, args.k_max, &args.q, config)?;
    let mut w = writer(out);
    w.write_record(["k", "check", "element", "expected", "actual"])?;
    for mm in &report.mismatches {
        w.write_record([
            mm.k.to_string(),
            mm.check.to_string(),
            mm.element.map(|e| e.to_string()).unwrap_or_default(),
            mm.expected.clone(),
            mm.actual.clone(),
        ])?;
    }
    w.flush()?;
    if report.passed() {
        eprintln!(
            "PASS n={} p={} m={} k<={}: {} comparisons",
            args.n, args.p, args.m, args.k_max, report.comparisons
        );
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_CERTIFY,
            message: format!(
                "FAIL n={} p={} m={} k<={}: {} of {} comparisons disagree",
                args.n,
                args.p,
                args.m,
                args.k_max,
                report.mismatches.len(),
                report.comparisons
            ),
        })
    }
}

pub fn simulate(args: &SimulateArgs, out: Out) -> Result<(), Failure> {
    let group = GroupParams::new(args.n, args.p)?;
    if args.reps == 0 {
        return Err(Failure::usage("--reps must be positive"));
    }
    let spec = MixtureSpec::top_m(group, args.m, args.k)?;
    let counts = simulate_chain(group, args.m, args.k, args.reps, args.seed)?;
    let law: Vec<f64> = level_law(&spec).iter().map(exact::to_f64).collect();
    let uniform: Vec<f64> = (0..=args.n)
        .map(|l| u_level_mass(group, l).map(|v| exact::to_f64(&v)))
        .collect::<wreathmix_core::Result<_>>()?;
    let tv_plugin = g(plug_in_tv(&counts, &uniform));
    let tv_exact = g(exact::to_f64(&wreathmix_core::distances::tv_exact(&spec).tv));

    let mut w = writer(out);
    w.write_record(["ell", "empirical", "exact", "uniform", "tv_plugin", "tv_exact"])?;
    for l in 0..=args.n {
        w.write_record([
            l.to_string(),
            g(counts[l] as f64 / args.reps as f64),
            g(law[l]),
            g(uniform[l]),
            tv_plugin.clone(),
            tv_exact.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
