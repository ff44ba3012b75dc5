use serde::Serialize;

use oppenheim_lab::enumeration::ApproxRecord;
use oppenheim_lab::ergodic::{
    measure_lower_bound_check, octant_cube, random_form, second_moment_experiment, HitIndicator,
};
use oppenheim_lab::experiments::{
    bad_set_fraction, profile, run_schedule, shrinking_target_fraction, CMode, Schedule, ScheduleReport,
};
use oppenheim_lab::forms::{GroupElement, TernaryForm};
use oppenheim_lab::output::{csv_line, fmt_f64};
use oppenheim_lab::seed::SeedStream;
use oppenheim_lab::spin::{
    spin_selftest, CoverVariant, SELFTEST_GROWTH_BAND, SELFTEST_HOMOMORPHISM_TOL, SELFTEST_KERNEL_TOL,
    SELFTEST_ORTHOGONALITY_TOL,
};
use oppenheim_lab::targets::make_region;
use oppenheim_lab::{Error, Result};

use crate::{Cli, Command, FormArg, Format, Run, VariantArg, EXIT_INVARIANT};

// stream domains, one per command
const SPIN: u64 = 1;
const ROGERS: u64 = 2;
const BADSET: u64 = 3;
const TARGET_MISS: u64 = 4;
const OPPENHEIM: u64 = 5;
const PROFILE: u64 = 6;
const MEASURE: u64 = 7;

fn json<T: Serialize + ?Sized>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize") + "\n"
}

fn table(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

fn ok(body: String) -> Result<Run> {
    Ok(Run { body, status: 0 })
}

pub fn run(cli: &Cli) -> Result<Run> {
    let seeds = SeedStream::new(cli.seed);
    match &cli.command {
        Command::SpinSelftest { json: as_json, pairs, variant } => {
            let variant = match variant {
                VariantArg::Standard => CoverVariant::Standard,
                VariantArg::Printed => CoverVariant::Printed,
                VariantArg::Typo => CoverVariant::TypoCa,
            };
            let format = if *as_json { Format::Json } else { cli.format };
            spin(*pairs, variant, format, &seeds.derive(SPIN))
        }
        Command::Rogers { vol, t, samples, base_points } => {
            rogers(*vol, *t, *samples, *base_points, cli.format, &seeds.derive(ROGERS))
        }
        Command::Badset { delta, xi, k, trials } => {
            let seeds = seeds.derive(BADSET);
            let rows = k
                .iter()
                .map(|k| bad_set_fraction(*k, *delta, *xi, *trials, &seeds).map(|f| (*k, f)))
                .collect::<Result<Vec<_>>>()?;
            ok(match cli.format {
                Format::Json => json(
                    &rows
                        .iter()
                        .map(|(k, f)| serde_json::json!({"k": k, "delta": delta, "xi": xi, "estimate": f}))
                        .collect::<Vec<_>>(),
                ),
                Format::Csv => table(
                    "k,delta,xi,trials,fraction,std_err",
                    rows.iter().map(|(k, f)| {
                        csv_line([
                            fmt_f64(*k),
                            fmt_f64(*delta),
                            fmt_f64(*xi),
                            f.trials.to_string(),
                            fmt_f64(f.fraction),
                            fmt_f64(f.std_err),
                        ])
                    }),
                ),
            })
        }
        Command::TargetMiss { xi, delta, t, trials, budget } => {
            let region = HitIndicator(make_region(*xi, *delta)?);
            let seeds = seeds.derive(TARGET_MISS);
            let rows = t
                .iter()
                .map(|t| shrinking_target_fraction(*t, &region, *trials, *budget, &seeds).map(|f| (*t, f)))
                .collect::<Result<Vec<_>>>()?;
            ok(match cli.format {
                Format::Json => json(
                    &rows
                        .iter()
                        .map(|(t, f)| {
                            serde_json::json!({"t": t, "xi": xi, "delta": delta, "budget": budget, "estimate": f})
                        })
                        .collect::<Vec<_>>(),
                ),
                Format::Csv => table(
                    "t,xi,delta,trials,budget,fraction,std_err",
                    rows.iter().map(|(t, f)| {
                        csv_line([
                            fmt_f64(*t),
                            fmt_f64(*xi),
                            fmt_f64(*delta),
                            f.trials.to_string(),
                            budget.to_string(),
                            fmt_f64(f.fraction),
                            fmt_f64(f.std_err),
                        ])
                    }),
                ),
            })
        }
        Command::Oppenheim { schedule, n_exp, delta_exp, eta, k, forms, c, control } => {
            let mut s = match (schedule.as_deref(), n_exp, delta_exp) {
                (Some(name), _, _) => Schedule::preset(name)
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown schedule {name:?}")))?,
                (None, Some(a), Some(b)) => Schedule::power(*a, *b, *eta),
                _ => Schedule::pow14(),
            };
            if schedule.is_some() {
                s.eta = *eta;
            }
            if let Some(c) = c {
                s = s.with_c(CMode::Fixed(*c));
            }
            oppenheim(&s, k, *forms, *control, cli.format, &seeds.derive(OPPENHEIM))
        }
        Command::Profile { form, k, n, step } => {
            let q = match form {
                FormArg::Q0 => TernaryForm::q0(),
                FormArg::Random => random_form(&mut seeds.derive(PROFILE).rng(0)).1,
            };
            let rows = profile(&q, *k, *n, *step)?;
            ok(match cli.format {
                Format::Json => json(&serde_json::json!({"form": q, "rows": rows})),
                Format::Csv => table(ApproxRecord::CSV_HEADER, rows.iter().map(ApproxRecord::csv_row)),
            })
        }
        Command::MeasureBound { xi, delta, t, samples, base_points } => {
            let r = make_region(*xi, *delta)?;
            let rep = measure_lower_bound_check(&r, *t, *samples, *base_points, &seeds.derive(MEASURE))?;
            let body = match cli.format {
                Format::Json => json(&rep),
                Format::Csv => table(
                    "xi,delta,volume,estimate,std_err,samples,t,base_points,bound,pass",
                    [csv_line([
                        fmt_f64(rep.xi),
                        fmt_f64(rep.delta),
                        fmt_f64(rep.volume),
                        fmt_f64(rep.estimate),
                        fmt_f64(rep.std_err),
                        rep.samples.to_string(),
                        fmt_f64(rep.t),
                        rep.base_points.to_string(),
                        fmt_f64(rep.bound),
                        rep.pass.to_string(),
                    ])],
                ),
            };
            if !rep.pass {
                eprintln!("measure-bound: estimate + 3σ falls below {}", rep.bound);
            }
            Ok(Run {
                body,
                status: if rep.pass { 0 } else { EXIT_INVARIANT },
            })
        }
    }
}

fn spin(pairs: usize, variant: CoverVariant, format: Format, seeds: &SeedStream) -> Result<Run> {
    if pairs == 0 {
        return Err(Error::InvalidArgument("pairs must be positive".into()));
    }
    let r = spin_selftest(variant, pairs, &mut seeds.rng(0));
    let body = match format {
        Format::Json => json(&r),
        Format::Csv => {
            let (lo, hi) = SELFTEST_GROWTH_BAND;
            let failed = |name: &str| r.failed.contains(&name);
            let row = |name: &str, value: f64, limit: f64, bad: bool| {
                csv_line([name.to_string(), fmt_f64(value), fmt_f64(limit), (!bad).to_string()])
            };
            table(
                "invariant,value,limit,pass",
                [
                    row("homomorphism", r.homomorphism, SELFTEST_HOMOMORPHISM_TOL, failed("homomorphism")),
                    row("orthogonality", r.orthogonality, SELFTEST_ORTHOGONALITY_TOL, failed("orthogonality")),
                    row("kernel", r.kernel, SELFTEST_KERNEL_TOL, failed("kernel")),
                    row("growth_min", r.growth_min, lo, r.growth_min < lo),
                    row("growth_max", r.growth_max, hi, r.growth_max > hi),
                ],
            )
        }
    };
    if !r.passed() {
        eprintln!("spin-selftest: failed invariant(s): {}", r.failed.join(", "));
    }
    Ok(Run {
        body,
        status: if r.passed() { 0 } else { EXIT_INVARIANT },
    })
}

fn rogers(vol: f64, t: f64, samples: usize, base_points: usize, format: Format, seeds: &SeedStream) -> Result<Run> {
    let bx = octant_cube(vol)?;
    let rep = second_moment_experiment(&bx, t, samples, base_points, seeds)?;
    let lo = vol * vol - 3.0 * rep.std_err;
    let hi = rep.upper_bound + 3.0 * rep.std_err;
    let in_bounds = (lo..=hi).contains(&rep.estimate);
    let matched = rep.convention.map_or("none", |c| c.name());
    let body = match format {
        Format::Json => json(&rep),
        Format::Csv => table(
            "estimate,std_err,samples,t,base_points,convention,rhs,tail_bound,z,matches,matched",
            rep.fits.iter().map(|f| {
                csv_line([
                    fmt_f64(rep.estimate),
                    fmt_f64(rep.std_err),
                    rep.samples.to_string(),
                    fmt_f64(rep.t),
                    rep.base_points.to_string(),
                    f.convention.name().to_string(),
                    fmt_f64(f.rhs),
                    fmt_f64(f.tail_bound),
                    fmt_f64(f.z),
                    f.matches.to_string(),
                    matched.to_string(),
                ])
            }),
        ),
    };
    if !in_bounds {
        eprintln!("rogers: estimate {} outside [{lo}, {hi}]", rep.estimate);
    }
    Ok(Run {
        body,
        status: if in_bounds { 0 } else { EXIT_INVARIANT },
    })
}

fn oppenheim(
    s: &Schedule,
    ks: &[f64],
    forms: usize,
    control: bool,
    format: Format,
    seeds: &SeedStream,
) -> Result<Run> {
    let mut reports: Vec<ScheduleReport> = (0..forms)
        .map(|i| {
            let (g, q) = random_form(&mut seeds.rng(i as u64));
            run_schedule(s, &q, &g, ks)
        })
        .collect::<Result<_>>()?;
    if control {
        reports.push(run_schedule(s, &TernaryForm::q0(), &GroupElement::identity(), ks)?);
    }
    ok(match format {
        Format::Json => json(&reports),
        Format::Csv => table(
            ScheduleReport::CSV_HEADER,
            reports.iter().enumerate().flat_map(|(i, r)| r.csv_rows(i)),
        ),
    })
}
