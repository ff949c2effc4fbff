//! The interleaved pipeline: one chain of refinements per target `m_k`,
//! nested sets `S_k`, a diagonal selection and rigidity profiles.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cantor::{
    check_family_chain, continuity_violations, l1_char_distance, stage_measure, ClosedArc, DiscreteMeasure,
    IntervalFamily, PointRule,
};
use super::setspec::SetSpec;
use super::stage::{nearest_psi, q_verdict, refine_stage, Caps, StageRecord};
use crate::dynamics::density::{delta_recurrence_falsify, standard_corpus, Falsification};
use crate::torus::{TorusPoint, Verdict, Q};
use crate::window::{spiral, Window, WindowedSet};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub stages: usize,
    pub targets: Vec<i64>,
    pub window: Window,
    pub caps: Caps,
}

impl PipelineConfig {
    pub fn new(stages: usize, targets: Vec<i64>, window: Window, caps: Caps) -> Result<Self> {
        let cfg = PipelineConfig {
            stages,
            targets,
            window,
            caps,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages == 0 {
            return Err(Error::invalid("at least one stage is required"));
        }
        if self.stages > 16 {
            return Err(Error::Cap(format!("{} stages requested, at most 16 supported", self.stages)));
        }
        if self.targets.is_empty() {
            return Err(Error::invalid("at least one target m is required"));
        }
        self.caps.validate()
    }
}

/// The first `count` integers in the order `0, 1, -1, 2, -2, ...`.
pub fn spiral_targets(count: usize) -> Vec<i64> {
    spiral(count as u64).take(count).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    pub r: u32,
    /// `|E_r|`.
    pub count: usize,
    /// Smallest `|n|` elements of `E_r`, at most `expand_cap`.
    pub selected: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QViolation {
    pub stage: usize,
    pub psi: Vec<u32>,
    pub n: i64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundViolation {
    pub stage: usize,
    pub later_stage: usize,
    pub psi: Vec<u32>,
    pub n: i64,
    pub value: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainChecks {
    pub cauchy_failures: Vec<usize>,
    pub q_checks: u64,
    pub q_violations: Vec<QViolation>,
    pub bound_checks: u64,
    pub bound_violations: Vec<BoundViolation>,
    /// Largest `value * k` over all bound checks; below 3 when all hold.
    pub worst_bound_ratio: f64,
    pub continuity_violations: usize,
    pub family_problems: Vec<String>,
    pub nested: bool,
    pub selections_in_set: bool,
}

impl ChainChecks {
    pub fn violations(&self) -> usize {
        self.cauchy_failures.len()
            + self.q_violations.len()
            + self.bound_violations.len()
            + self.continuity_violations
            + self.family_problems.len()
            + usize::from(!self.nested)
            + usize::from(!self.selections_in_set)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub stage: usize,
    pub shift: i64,
    #[serde(with = "crate::torus::q_str")]
    pub delta: Q,
    pub falsified: Option<Falsification>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub index: usize,
    pub target: i64,
    /// `|S_{k-1}|` on the window.
    pub input_size: usize,
    pub families: Vec<IntervalFamily>,
    pub records: Vec<StageRecord>,
    pub measure: DiscreteMeasure,
    pub expansions: Vec<Expansion>,
    /// `S_k`.
    pub next_set: Vec<i64>,
    /// This chain's part of the diagonal `S'`.
    pub diagonal: Vec<i64>,
    pub checks: ChainChecks,
    pub probes: Vec<Probe>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Stage,
    Diagonal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub kind: RowKind,
    pub chain: usize,
    pub stage: Option<usize>,
    pub s: i64,
    pub m: i64,
    /// `∫ |e((s - m) x) - 1| dsigma`.
    pub value: f64,
    pub bound: f64,
    pub within: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub set: SetSpec,
    pub config: PipelineConfig,
    pub chains: Vec<Chain>,
    pub diagonal: Vec<i64>,
    pub profile: Vec<ProfileRow>,
    pub envelope_violations: usize,
    pub gaps: usize,
}

impl PipelineReport {
    pub fn violations(&self) -> usize {
        self.chains.iter().map(|c| c.checks.violations()).sum::<usize>() + self.envelope_violations
    }

    pub fn holds(&self) -> bool {
        self.violations() == 0
    }
}

/// `∫ |e((s - m) x) - 1| dmu` for each `s`.
pub fn rigidity_profile(seq: &[i64], mu: &DiscreteMeasure, m: i64) -> Vec<(i64, f64)> {
    seq.iter().map(|&s| (s, mu.rigidity_value(s, m))).collect()
}

/// Map from stage-`to` interval index to its stage-`from` ancestor.
fn ancestors(families: &[IntervalFamily], from: usize, to: usize) -> Vec<usize> {
    (0..families[to].len())
        .map(|mut i| {
            for s in (from + 1..=to).rev() {
                i = families[s].parents[i];
            }
            i
        })
        .collect()
}

fn stage_bound(k: u32, m: i64, radius: u128, err: u128) -> f64 {
    let k = k as f64;
    let base = 3.0 / k;
    if m == 0 {
        return base;
    }
    let span = (radius as f64 + err as f64) / 2f64.powi(128);
    base + 2.0 * (PI / (2.0 * k)).sin() + 2.0 * PI * m.unsigned_abs() as f64 * span
}

fn check_chain(families: &[IntervalFamily], records: &[StageRecord], set: &WindowedSet, guard: crate::Guard) -> ChainChecks {
    let mut checks = ChainChecks {
        nested: true,
        selections_in_set: true,
        ..ChainChecks::default()
    };
    let measures: Vec<DiscreteMeasure> =
        families.iter().map(|f| stage_measure(f, PointRule::Representatives)).collect();
    for (idx, rec) in records.iter().enumerate() {
        let stage = idx + 1;
        let k = rec.k;
        if !rec.cauchy.holds {
            checks.cauchy_failures.push(stage);
        }
        for entry in &rec.psi_table {
            for &n in &entry.selection {
                if !set.contains(n) {
                    checks.selections_in_set = false;
                }
                checks.q_checks += 1;
                let v = q_verdict(&families[stage], k, &entry.psi, n, guard).unwrap_or(Verdict::No);
                if v != Verdict::Yes {
                    checks.q_violations.push(QViolation {
                        stage,
                        psi: entry.psi.clone(),
                        n,
                        verdict: v,
                    });
                }
            }
        }
        for later in stage..families.len() {
            let anc = ancestors(families, stage, later);
            let roots: Vec<Vec<TorusPoint>> = rec
                .psi_table
                .iter()
                .map(|e| anc.iter().map(|&a| TorusPoint::from_ratio(Q::new(e.psi[a] as i128, k as i128))).collect())
                .collect();
            for (entry, f) in rec.psi_table.iter().zip(&roots) {
                for &n in &entry.selection {
                    let value = l1_char_distance(&measures[later], f, n).unwrap_or(f64::INFINITY);
                    let bound = 3.0 / k as f64;
                    checks.bound_checks += 1;
                    checks.worst_bound_ratio = checks.worst_bound_ratio.max(value * k as f64);
                    if value >= bound {
                        checks.bound_violations.push(BoundViolation {
                            stage,
                            later_stage: later,
                            psi: entry.psi.clone(),
                            n,
                            value,
                            bound,
                        });
                    }
                }
            }
        }
    }
    let last = measures.last().expect("root family");
    checks.continuity_violations = continuity_violations(families, last).len();
    checks.family_problems = check_family_chain(families);
    checks
}

fn probes(records: &[StageRecord], caps: &Caps) -> Result<Vec<Probe>> {
    let corpus = standard_corpus(Window::symmetric(caps.probe_reach.max(1)), caps.seed)?;
    let mut out = Vec::new();
    for (idx, rec) in records.iter().enumerate() {
        let k = rec.k as i64;
        for shift in -k..=k {
            let members: Vec<i64> = rec.selection.iter().map(|n| n + shift).collect::<BTreeSet<_>>().into_iter().collect();
            let reach = members.iter().map(|n| n.abs()).max().unwrap_or(0);
            let s = WindowedSet::new(Window::symmetric(reach), members, format!("S'_{} + {shift}", idx + 1))?;
            let delta = Q::new(1, k as i128);
            out.push(Probe {
                stage: idx + 1,
                shift,
                delta,
                falsified: delta_recurrence_falsify(&s, delta, &corpus),
            });
        }
    }
    Ok(out)
}

fn run_chain(index: usize, target: i64, input: &WindowedSet, cfg: &PipelineConfig) -> Result<Chain> {
    let caps = &cfg.caps;
    let mut families = vec![IntervalFamily::root(ClosedArc::unit())];
    let mut records = Vec::with_capacity(cfg.stages);
    for k in 1..=cfg.stages as u32 {
        let (rec, fam) = refine_stage(families.last().expect("root"), k, input, caps, &[target])?;
        records.push(rec);
        families.push(fam);
    }
    let measure = stage_measure(families.last().expect("root"), PointRule::Representatives);
    let order: Vec<i64> = input
        .spiral_members()
        .into_iter()
        .filter(|&n| !(caps.exclude_zero && n == 0))
        .collect();
    let values: Vec<f64> = order.par_iter().map(|&n| measure.rigidity_value(n, target)).collect();
    let mut expansions = Vec::new();
    let mut next = BTreeSet::new();
    for r in 1..=caps.r_cap {
        let thr = 1.0 / r as f64;
        let members = order.iter().zip(&values).filter(|(_, &v)| v < thr).map(|(&n, _)| n);
        let count = members.clone().count();
        let selected: Vec<i64> = members.take(caps.expand_cap).collect();
        next.extend(selected.iter().copied());
        expansions.push(Expansion { r, count, selected });
    }
    let next_set: Vec<i64> = next.into_iter().collect();
    let diagonal = expansions.last().map(|e| e.selected.clone()).unwrap_or_default();
    let mut checks = check_chain(&families, &records, input, caps.guard);
    checks.nested = next_set.iter().all(|n| input.contains(*n));
    checks.selections_in_set &= diagonal.iter().all(|n| input.contains(*n));
    let probes = probes(&records, caps)?;
    Ok(Chain {
        index,
        target,
        input_size: input.len(),
        families,
        records,
        measure,
        expansions,
        next_set,
        diagonal,
        checks,
        probes,
    })
}

pub fn profile_rows(chain: &Chain, m: i64, r_cap: u32) -> Vec<ProfileRow> {
    let mut rows = Vec::new();
    for (idx, rec) in chain.records.iter().enumerate() {
        let psi = nearest_psi(rec.points.entries(), m, rec.k);
        let Some(entry) = rec.entry(&psi) else { continue };
        let bound = stage_bound(rec.k, m, rec.cauchy.radius, rec.cauchy.point_err);
        for (s, value) in rigidity_profile(&entry.selection, &chain.measure, m) {
            rows.push(ProfileRow {
                kind: RowKind::Stage,
                chain: chain.index,
                stage: Some(idx + 1),
                s,
                m,
                value,
                bound,
                within: value < bound,
            });
        }
    }
    if m == chain.target {
        let bound = 1.0 / r_cap as f64;
        for (s, value) in rigidity_profile(&chain.diagonal, &chain.measure, m) {
            rows.push(ProfileRow {
                kind: RowKind::Diagonal,
                chain: chain.index,
                stage: None,
                s,
                m,
                value,
                bound,
                within: value < bound,
            });
        }
    }
    rows
}

pub fn build_ks_pipeline(set: &SetSpec, cfg: &PipelineConfig) -> Result<PipelineReport> {
    set.validate()?;
    cfg.validate()?;
    let base = set.enumerate(cfg.window);
    if base.is_empty() {
        return Err(Error::invalid(format!("{} has no members in {}", set.describe(), cfg.window)));
    }
    let mut current = base;
    let mut chains = Vec::with_capacity(cfg.targets.len());
    for (index, &target) in cfg.targets.iter().enumerate() {
        let chain = run_chain(index, target, &current, cfg)?;
        current = WindowedSet::new(cfg.window, chain.next_set.clone(), format!("S_{}", index + 1))?;
        chains.push(chain);
    }
    let diagonal: Vec<i64> = chains
        .iter()
        .flat_map(|c| c.diagonal.iter().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let profile: Vec<ProfileRow> = chains.iter().flat_map(|c| profile_rows(c, c.target, cfg.caps.r_cap)).collect();
    let envelope_violations = profile.iter().filter(|r| !r.within).count();
    let gaps = chains.iter().flat_map(|c| &c.records).map(|r| r.gaps).sum();
    Ok(PipelineReport {
        set: set.clone(),
        config: cfg.clone(),
        chains,
        diagonal,
        profile,
        envelope_violations,
        gaps,
    })
}

pub fn write_profile_csv<W: Write>(rows: &[ProfileRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["s", "m", "value", "bound", "within", "kind", "chain", "stage"])?;
    for r in rows {
        let kind = match r.kind {
            RowKind::Stage => "stage",
            RowKind::Diagonal => "diagonal",
        };
        w.write_record([
            r.s.to_string(),
            r.m.to_string(),
            format!("{:.17e}", r.value),
            format!("{:.17e}", r.bound),
            (if r.within { "1" } else { "0" }).to_string(),
            kind.to_string(),
            r.chain.to_string(),
            r.stage.map(|s| s.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_measures_csv<W: Write>(report: &PipelineReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["chain", "target", "x", "x_decimal", "weight"])?;
    for c in &report.chains {
        for a in &c.measure.atoms {
            w.write_record([
                c.index.to_string(),
                c.target.to_string(),
                a.x.to_string(),
                a.x.to_decimal(20),
                a.weight.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `stages.json`, `measure.csv` and `profile.csv` into `dir`.
pub fn write_artifacts(report: &PipelineReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let json = std::io::BufWriter::new(std::fs::File::create(dir.join("stages.json"))?);
    serde_json::to_writer_pretty(json, report)?;
    write_measures_csv(report, std::fs::File::create(dir.join("measure.csv"))?)?;
    write_profile_csv(&report.profile, std::fs::File::create(dir.join("profile.csv"))?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(set: SetSpec, stages: usize, targets: Vec<i64>) -> PipelineReport {
        let caps = Caps {
            max_points: 3,
            ..Caps::default()
        };
        let cfg = PipelineConfig::new(stages, targets, Window::symmetric(20_000), caps).unwrap();
        build_ks_pipeline(&set, &cfg).unwrap()
    }

    #[test]
    fn all_integers_two_stages() {
        let r = small(SetSpec::All, 2, vec![0]);
        assert!(r.holds(), "{:?}", r.chains[0].checks);
        assert!(!r.diagonal.is_empty());
        assert!(r.profile.iter().filter(|p| p.kind == RowKind::Stage).all(|p| p.value < 3.0 / p.stage.unwrap() as f64));
    }

    #[test]
    fn even_integers_stay_even() {
        let r = small(SetSpec::Progression { a: 0, q: 2 }, 2, vec![0, 1]);
        assert!(r.holds());
        for c in &r.chains {
            for rec in &c.records {
                assert!(rec.selection.iter().all(|n| n % 2 == 0));
            }
            assert!(c.next_set.iter().all(|n| n % 2 == 0));
        }
        assert!(r.diagonal.iter().all(|n| n % 2 == 0));
    }

    #[test]
    fn profile_examples() {
        let mu = DiscreteMeasure::point_mass(TorusPoint::zero());
        assert!(rigidity_profile(&[1, 5, -9], &mu, 3).iter().all(|(_, v)| *v == 0.0));
        let mu = DiscreteMeasure::point_mass(TorusPoint::from_ratio(Q::new(1, 3)));
        assert_eq!(rigidity_profile(&[4], &mu, 4), vec![(4, 0.0)]);
    }

    #[test]
    fn deterministic() {
        let a = serde_json::to_string(&small(SetSpec::All, 2, vec![0])).unwrap();
        let b = serde_json::to_string(&small(SetSpec::All, 2, vec![0])).unwrap();
        assert_eq!(a, b);
    }
}
