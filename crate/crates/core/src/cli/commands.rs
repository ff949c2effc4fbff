use std::fs::File;

use super::*;
use crate::bohr::{
    bh_contains, bh_enumerate, bohr_contains, bohr_enumerate, check_sumset_containment, shifted_bh_cover,
    verify_enumeration_csv, write_enumeration_csv, BohrHammingSpec, BohrSpec,
};
use crate::diophantine::{embed_group, kronecker_approximate, ApproxQuery, Strategy};
use crate::dynamics::density::{delta_recurrence_falsify, standard_corpus, upper_banach_density};
use crate::dynamics::{aura_demo, return_set, BoxSet, Prepared, RotationSystem};
use crate::kleitman::{hamming_recurrence_witness, kleitman_check, KleitmanInstance, Mode, WitnessOutcome};
use crate::ks::pipeline::{profile_rows, write_measures_csv, write_profile_csv, PipelineReport};
use crate::ks::{build_ks_pipeline, spiral_targets, PipelineConfig, SetSpec};
use crate::torus::Verdict;
use crate::window::WindowedSet;

fn json<T: serde::Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}

fn parse_json<T: serde::de::DeserializeOwned>(arg: &str) -> Result<T> {
    Ok(serde_json::from_str(&read_input(arg)?)?)
}

fn verify_csv(path: &Path, pred: impl Fn(i64) -> Verdict) -> Result<Output> {
    let (rows, mismatches) = verify_enumeration_csv(File::open(path)?, pred)?;
    let report = serde_json::json!({
        "file": path.display().to_string(),
        "rows": rows,
        "mismatches": mismatches,
    });
    let mut out = Output::new("verify.json", json(&report)?)
        .line(format!("verified {rows} rows, {} mismatches", mismatches.len()));
    out.violations = mismatches.len() as u64;
    Ok(out)
}

pub(super) fn dispatch(cmd: &Group, guard: Guard) -> Result<Output> {
    match cmd {
        Group::Bohr(c) => bohr(c, guard),
        Group::Bh(c) => bh(c, guard),
        Group::Kronecker(c) => kronecker(c, guard),
        Group::System(c) => system(c, guard),
        Group::Density(c) => density(c),
        Group::Kleitman(c) => kleitman(c, guard),
        Group::Ks(c) => ks(c, guard),
    }
}

fn bohr(cmd: &BohrCmd, guard: Guard) -> Result<Output> {
    let BohrCmd::Enumerate {
        freq,
        eta,
        window,
        verify,
    } = cmd;
    let mut spec = BohrSpec::new(freq.resolve()?, *eta)?;
    spec.guard = guard;
    if let Some(path) = verify {
        return verify_csv(path, |n| bohr_contains(&spec, n));
    }
    let set = bohr_enumerate(&spec, *window);
    let mut buf = Vec::new();
    write_enumeration_csv(&mut buf, &spec.freq, 0, &set)?;
    Ok(Output::new("bohr.csv", buf).line(format!(
        "bohr(eta={eta}) on {window}: {} members, {} undecided",
        set.len(),
        set.ambiguous().len()
    )))
}

fn bh(cmd: &BhCmd, guard: Guard) -> Result<Output> {
    match cmd {
        BhCmd::Enumerate {
            freq,
            eps,
            eta,
            shift,
            window,
            verify,
        } => {
            let mut spec = BohrHammingSpec::new(freq.resolve()?, *eps, *eta, *shift)?;
            spec.guard = guard;
            if let Some(path) = verify {
                return verify_csv(path, |n| bh_contains(&spec, n));
            }
            let set = bh_enumerate(&spec, *window);
            let mut buf = Vec::new();
            write_enumeration_csv(&mut buf, &spec.freq, *shift, &set)?;
            Ok(Output::new("bh.csv", buf).line(format!(
                "bh(eps={eps}, eta={eta}) + {shift} on {window}: {} members, threshold {} of {}",
                set.len(),
                spec.threshold_count(),
                spec.freq.dim()
            )))
        }
        BhCmd::CheckSumset { freq, eps, eta, window } => {
            let report = check_sumset_containment(&freq.resolve()?, *eps, *eta, *window, guard)?;
            let mut out = Output::new("containment.json", json(&report)?).line(format!(
                "{} pairs checked, {} ambiguous, {} violations",
                report.pairs_checked, report.ambiguous, report.violation_count
            ));
            out.violations = report.violation_count;
            Ok(out)
        }
        BhCmd::Cover {
            freq,
            z,
            eps,
            eta,
            bound,
            window,
        } => {
            let report = shifted_bh_cover(&freq.resolve()?, z, *eps, *eta, *bound, *window, guard)?;
            let mut out = Output::new("cover.json", json(&report)?).line(format!(
                "shift m = {}, {} checked, {} violations",
                report.m,
                report.checked,
                report.violations.len()
            ));
            out.violations = report.violations.len() as u64;
            Ok(out)
        }
    }
}

fn kronecker(cmd: &KroneckerCmd, guard: Guard) -> Result<Output> {
    match cmd {
        KroneckerCmd::Solve {
            freq,
            target,
            eps,
            bound,
            strategy,
            nonzero,
        } => {
            let strategy = match strategy {
                StrategyArg::Exhaustive => Strategy::Exhaustive,
                StrategyArg::Lattice => Strategy::Lattice,
            };
            let mut q = ApproxQuery::new(freq.resolve()?, target.clone(), *eps, *bound)?
                .with_strategy(strategy)
                .with_guard(guard);
            if *nonzero {
                q = q.nonzero();
            }
            match kronecker_approximate(&q) {
                Ok(sol) => {
                    let line = format!("n = {} (max norm {:e})", sol.n, sol.norms.iter().copied().fold(0.0, f64::max));
                    Ok(Output::new("solution.json", json(&sol)?).line(line))
                }
                Err(Error::NotFound { bound, best_n, best_norm }) => {
                    let report = serde_json::json!({
                        "status": "not_found",
                        "bound": bound,
                        "best_n": best_n,
                        "best_norm": best_norm,
                    });
                    Ok(Output::new("solution.json", json(&report)?).line(format!("no solution with |n| <= {bound}")))
                }
                Err(e) => Err(e),
            }
        }
        KroneckerCmd::Embed { freq, k, eps, bound } => match embed_group(&freq.resolve()?, *k, *eps, *bound, guard) {
            Ok(table) => {
                let reach = table.values().iter().map(|n| n.abs()).max().unwrap_or(0);
                Ok(Output::new("embedding.json", json(&table)?).line(format!(
                    "embedded {} points, max |n_w| = {reach}",
                    table.entries.len()
                )))
            }
            Err(Error::Embedding { failures }) => {
                let report = serde_json::json!({ "status": "not_found", "failures": failures });
                Ok(Output::new("embedding.json", json(&report)?)
                    .line(format!("{} targets unreachable within the bound", failures.len())))
            }
            Err(e) => Err(e),
        },
    }
}

fn system(cmd: &SystemCmd, guard: Guard) -> Result<Output> {
    match cmd {
        SystemCmd::Returns {
            spec,
            set,
            c,
            window,
            verify,
        } => {
            let sys: RotationSystem = parse_json(spec)?;
            let d: BoxSet = parse_json(set)?;
            if let Some(path) = verify {
                let prep = Prepared::new(&sys, &d)?;
                return verify_csv(path, |n| prep.intersection(n).exceeds(*c, guard));
            }
            let r = return_set(&sys, &d, *c, *window, guard)?;
            let mut buf = Vec::new();
            r.write_csv(&mut buf)?;
            Ok(Output::new("returns.csv", buf).line(format!(
                "mu(D) = {}; R_{c} has {} members on {window}, {} undecided",
                r.measure,
                r.members.len(),
                r.members.ambiguous().len()
            )))
        }
        SystemCmd::Aura { spec, set, s, e, window } => {
            let sys: RotationSystem = parse_json(spec)?;
            let d: BoxSet = parse_json(set)?;
            let s_spec: SetSpec = parse_json(s)?;
            let e_spec: SetSpec = parse_json(e)?;
            s_spec.validate()?;
            e_spec.validate()?;
            let report = aura_demo(&s_spec.enumerate(*window), &e_spec.enumerate(*window), &sys, &d, *window, guard)?;
            Ok(Output::new("aura.json", json(&report)?).line(format!(
                "{} members of S reached from E, {} undecided",
                report.members.len(),
                report.ambiguous.len()
            )))
        }
    }
}

fn density(cmd: &DensityCmd) -> Result<Output> {
    let DensityCmd::Falsify {
        set,
        delta,
        window,
        seed,
    } = cmd;
    let spec: SetSpec = parse_json(set)?;
    spec.validate()?;
    let span = window.hi - window.lo;
    let s = spec.enumerate(Window::symmetric(span));
    let corpus = standard_corpus(*window, *seed)?;
    let hit = delta_recurrence_falsify(&s, *delta, &corpus);
    let densities: Vec<serde_json::Value> = corpus
        .iter()
        .map(|a| {
            let ub = upper_banach_density(a, &[a.window().len() / 4]);
            serde_json::json!({
                "source": a.source(),
                "density": a.density().to_string(),
                "block_density": ub.summary.map(|q| q.to_string()),
            })
        })
        .collect();
    let report = serde_json::json!({
        "set": spec,
        "delta": delta.to_string(),
        "corpus_window": window.to_string(),
        "seed": seed,
        "corpus": densities,
        "falsified": hit,
    });
    let line = match &hit {
        Some(f) => format!("falsified by corpus set {} ({}), density {}", f.index, f.source, f.density),
        None => format!("no corpus set with density > {delta} avoids S"),
    };
    Ok(Output::new("falsify.json", json(&report)?).line(line))
}

fn kleitman(cmd: &KleitmanCmd, guard: Guard) -> Result<Output> {
    match cmd {
        KleitmanCmd::Verify {
            k,
            d,
            delta,
            r,
            mode,
            trials,
            seed,
            cap,
        } => {
            let inst = KleitmanInstance {
                k: *k,
                d: *d,
                delta: *delta,
                r: *r,
                mode: match mode {
                    ModeArg::Exhaustive => Mode::Exhaustive,
                    ModeArg::Sampled => Mode::Sampled {
                        trials: *trials,
                        seed: *seed,
                    },
                },
            };
            let report = kleitman_check(&inst, *cap)?;
            let verdict = if report.holds() { "holds" } else { "counterexample" };
            Ok(Output::new("kleitman.json", json(&report)?).line(format!(
                "k={k} d={d} delta={delta} r={r}: {verdict} after {} subsets of size >= {}",
                report.subsets, report.min_size
            )))
        }
        KleitmanCmd::Witness {
            freq,
            eps,
            m,
            k,
            set,
            window,
            bound,
        } => {
            let f = freq.resolve()?;
            let a = match set {
                Some(s) => {
                    let spec: SetSpec = parse_json(s)?;
                    spec.validate()?;
                    spec.enumerate(*window)
                }
                None => WindowedSet::full(*window),
            };
            let outcome = hamming_recurrence_witness(&f, *eps, *m, &a, *k, *bound, guard)?;
            let mut violations = 0;
            let line = match &outcome {
                WitnessOutcome::Witness(w) => {
                    let mut spec = BohrHammingSpec::new(f.clone(), *eps, *eps, *m)?;
                    spec.guard = guard;
                    let recheck = bh_contains(&spec, w.a - w.b);
                    if recheck != Verdict::Yes || !a.contains(w.a) || !a.contains(w.b) {
                        violations = 1;
                    }
                    format!("a = {}, b = {}, a - b - m = {}, re-check {}", w.a, w.b, w.a - w.b - m, recheck.flag())
                }
                WitnessOutcome::Failure { stage, detail } => format!("no witness ({stage:?}): {detail}"),
            };
            let mut out = Output::new("witness.json", json(&outcome)?).line(line);
            out.violations = violations;
            Ok(out)
        }
    }
}

fn ks_summary(report: &PipelineReport) -> Vec<String> {
    let mut lines = Vec::new();
    for c in &report.chains {
        lines.push(format!(
            "chain {} (m = {}): |S_in| = {}, stage selections {:?}, |S_out| = {}, violations {}",
            c.index,
            c.target,
            c.input_size,
            c.records.iter().map(|r| r.selection.len()).collect::<Vec<_>>(),
            c.next_set.len(),
            c.checks.violations()
        ));
    }
    lines.push(format!(
        "diagonal |S'| = {}, gaps {}, envelope violations {}",
        report.diagonal.len(),
        report.gaps,
        report.envelope_violations
    ));
    lines
}

fn ks(cmd: &KsCmd, _guard: Guard) -> Result<Output> {
    match cmd {
        KsCmd::Build {
            set,
            stages,
            window,
            caps,
            target,
            targets,
            seed,
        } => {
            let spec: SetSpec = parse_json(set)?;
            let mut caps = parse_caps(caps.as_deref())?;
            if let Some(s) = seed {
                caps.seed = *s;
            }
            let targets = if target.is_empty() { spiral_targets(*targets) } else { target.clone() };
            let cfg = PipelineConfig::new(*stages, targets, *window, caps)?;
            let report = build_ks_pipeline(&spec, &cfg)?;
            let mut measure = Vec::new();
            write_measures_csv(&report, &mut measure)?;
            let mut profile = Vec::new();
            write_profile_csv(&report.profile, &mut profile)?;
            let mut out = Output::new("stages.json", json(&report)?)
                .with("measure.csv", measure)
                .with("profile.csv", profile);
            out.summary = ks_summary(&report);
            out.violations = report.violations() as u64;
            Ok(out)
        }
        KsCmd::Profile { report, m } => {
            let report: PipelineReport = serde_json::from_str(&read_input(report)?)?;
            let r_cap = report.config.caps.r_cap;
            let rows: Vec<_> = report
                .chains
                .iter()
                .flat_map(|c| profile_rows(c, m.unwrap_or(c.target), r_cap))
                .collect();
            let bad = rows.iter().filter(|r| !r.within).count();
            let mut buf = Vec::new();
            write_profile_csv(&rows, &mut buf)?;
            let mut out =
                Output::new("profile.csv", buf).line(format!("{} profile rows, {bad} outside their bound", rows.len()));
            out.violations = bad as u64;
            Ok(out)
        }
    }
}
