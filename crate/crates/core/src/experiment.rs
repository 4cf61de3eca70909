//! Factorial sweeps over (g, d, m) and extreme-level effect estimates.
//!
//! Every run in a sweep gets its own seed,
//! `derive_seed(master_seed, [g_index, d_index, m_index, rep])`, which seeds
//! both the network generator and the simulation. Rows are produced in
//! (g, d, m, rep) index order whatever the number of worker threads.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain::{scenario_from_value, validate_scenario, NetGenEmbed, Scenario};
use crate::engine::run;
use crate::error::{Error, Result};
use crate::metrics::{compute_metrics, Metrics};
use crate::netgen::{generate_case_study_org, NetGenConfig, DEFAULT_N_TASKS};
use crate::rng::{derive_seed, SimRng};

pub const DEFAULT_G_LEVELS: [f64; 4] = [0.4, 0.5, 0.6, 0.7];
pub const DEFAULT_D_LEVELS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
pub const DEFAULT_M_LEVELS: [f64; 3] = [0.0, 0.5, 1.0];
pub const DEFAULT_REPLICATIONS: u32 = 55;
pub const DEFAULT_PROJECTS: u32 = 3;
pub const DEFAULT_HELPERS_PER_MANAGER: u32 = 2;
pub const MIN_BOOTSTRAP: usize = 100;

/// Ten-agent case-study organization working three generated projects of
/// thirty tasks each.
pub fn default_base_scenario() -> Scenario {
    let mut s = Scenario::with_defaults(
        generate_case_study_org(DEFAULT_HELPERS_PER_MANAGER),
        vec![],
        0,
    );
    s.netgen = Some(NetGenEmbed {
        config: NetGenConfig::new(DEFAULT_N_TASKS, 0.0, 0),
        projects: DEFAULT_PROJECTS,
    });
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub g_levels: Vec<f64>,
    pub d_levels: Vec<f64>,
    pub m_levels: Vec<f64>,
    pub replications: u32,
    pub base_scenario: Scenario,
    pub master_seed: u64,
}

const GRID_KEYS: &[&str] = &[
    "g_levels",
    "d_levels",
    "m_levels",
    "replications",
    "base_scenario",
    "master_seed",
];

impl ExperimentGrid {
    pub fn with_defaults(master_seed: u64) -> Self {
        ExperimentGrid {
            g_levels: DEFAULT_G_LEVELS.to_vec(),
            d_levels: DEFAULT_D_LEVELS.to_vec(),
            m_levels: DEFAULT_M_LEVELS.to_vec(),
            replications: DEFAULT_REPLICATIONS,
            base_scenario: default_base_scenario(),
            master_seed,
        }
    }

    pub fn runs(&self) -> usize {
        self.g_levels.len() * self.d_levels.len() * self.m_levels.len() * self.replications as usize
    }

    /// Parse a grid document. Omitted fields take their defaults; the master
    /// seed must come from the document or from `seed_override`.
    pub fn from_json_with_seed(text: &str, seed_override: Option<u64>) -> Result<Self> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("grid is not valid JSON: {e}")))?;
        let Value::Object(mut obj) = value else {
            return Err(Error::Config("grid must be a JSON object".into()));
        };
        if let Some(k) = obj.keys().find(|k| !GRID_KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown grid key `{k}`")));
        }
        let master_seed = match (seed_override, obj.get("master_seed")) {
            (Some(s), _) => s,
            (None, Some(v)) => v
                .as_u64()
                .ok_or_else(|| Error::Config("master_seed must be an unsigned integer".into()))?,
            (None, None) => {
                return Err(Error::Config(
                    "no seed: pass --seed or set master_seed".into(),
                ))
            }
        };
        let mut grid = ExperimentGrid::with_defaults(master_seed);
        let levels = |v: Value, name: &str| -> Result<Vec<f64>> {
            serde_json::from_value(v).map_err(|e| Error::Config(format!("{name}: {e}")))
        };
        if let Some(v) = obj.remove("g_levels") {
            grid.g_levels = levels(v, "g_levels")?;
        }
        if let Some(v) = obj.remove("d_levels") {
            grid.d_levels = levels(v, "d_levels")?;
        }
        if let Some(v) = obj.remove("m_levels") {
            grid.m_levels = levels(v, "m_levels")?;
        }
        if let Some(v) = obj.remove("replications") {
            grid.replications = serde_json::from_value(v)
                .map_err(|e| Error::Config(format!("replications: {e}")))?;
        }
        if let Some(mut v) = obj.remove("base_scenario") {
            // The per-run seed replaces whatever the template carries.
            grid.base_scenario = scenario_from_value(&mut v, Some(0))?;
        }
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, levels) in [
            ("g_levels", &self.g_levels),
            ("d_levels", &self.d_levels),
            ("m_levels", &self.m_levels),
        ] {
            if levels.is_empty() {
                return Err(Error::Config(format!("{name} is empty")));
            }
            if let Some(x) = levels.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(Error::Config(format!("{name} value {x} is outside [0, 1]")));
            }
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.base_scenario.netgen.is_none() {
            return Err(Error::Config(
                "base_scenario needs a netgen block to regenerate networks".into(),
            ));
        }
        Ok(())
    }

    /// The scenario run for one cell and replication.
    pub fn cell_scenario(&self, gi: usize, di: usize, mi: usize, rep: u32) -> Result<Scenario> {
        let seed = derive_seed(
            self.master_seed,
            &[gi as u64, di as u64, mi as u64, rep as u64],
        );
        let mut s = self.base_scenario.clone();
        s.seed = seed;
        s.goal_congruence = self.g_levels[gi];
        s.micro_management = self.m_levels[mi];
        let embed = s.netgen.as_mut().expect("validated grid has netgen");
        embed.config.target_d = self.d_levels[di];
        embed.config.seed = seed;
        s.regenerate_networks()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub g: f64,
    pub d_target: f64,
    pub d_measured: f64,
    pub m: f64,
    pub rep: u32,
    pub seed: u64,
    pub duration: u64,
    pub cost: f64,
    pub productivity: f64,
    pub quality: f64,
    pub pressure: f64,
    pub effectiveness: f64,
}

pub const RESULT_HEADER: &str =
    "g,d_target,d_measured,m,rep,seed,duration,cost,productivity,quality,pressure,effectiveness";

impl ResultRow {
    pub fn metric(&self, m: Metric) -> f64 {
        match m {
            Metric::Duration => self.duration as f64,
            Metric::Cost => self.cost,
            Metric::Productivity => self.productivity,
            Metric::Quality => self.quality,
            Metric::Pressure => self.pressure,
            Metric::Effectiveness => self.effectiveness,
        }
    }

    pub fn level(&self, f: Factor) -> f64 {
        match f {
            Factor::G => self.g,
            Factor::D => self.d_target,
            Factor::M => self.m,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        if self.rows.is_empty() {
            w.write_record(RESULT_HEADER.split(','))?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.join(",") != RESULT_HEADER {
            return Err(Error::Config(format!(
                "unexpected table header `{}`",
                header.join(",")
            )));
        }
        let rows = r
            .deserialize()
            .collect::<std::result::Result<Vec<ResultRow>, _>>()?;
        Ok(ResultTable { rows })
    }
}

/// Run every cell and replication of `grid`. `jobs` bounds the worker
/// threads (None lets the pool decide); the table does not depend on it.
pub fn run_sweep(grid: &ExperimentGrid, jobs: Option<usize>) -> Result<ResultTable> {
    grid.validate()?;
    let mut cells = Vec::with_capacity(grid.runs());
    for gi in 0..grid.g_levels.len() {
        for di in 0..grid.d_levels.len() {
            for mi in 0..grid.m_levels.len() {
                for rep in 0..grid.replications {
                    cells.push((gi, di, mi, rep));
                }
            }
        }
    }
    let run_cell = |&(gi, di, mi, rep): &(usize, usize, usize, u32)| -> Result<ResultRow> {
        let s = grid.cell_scenario(gi, di, mi, rep)?;
        let report = validate_scenario(&s);
        if !report.is_valid() {
            return Err(Error::InvalidCell {
                g_index: gi,
                d_index: di,
                m_index: mi,
                rep: rep as usize,
                report,
            });
        }
        let result = run(&s)?;
        let m = compute_metrics(&result, &s)?;
        row(&s, grid.d_levels[di], rep, &m)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let rows = pool.install(|| cells.par_iter().map(run_cell).collect::<Result<Vec<_>>>())?;
    Ok(ResultTable { rows })
}

fn row(s: &Scenario, d_target: f64, rep: u32, m: &Metrics) -> Result<ResultRow> {
    Ok(ResultRow {
        g: s.goal_congruence,
        d_target,
        d_measured: s.mean_dependence()?,
        m: s.micro_management,
        rep,
        seed: s.seed,
        duration: m.duration,
        cost: m.cost,
        productivity: m.productivity,
        quality: m.quality,
        pressure: m.pressure,
        effectiveness: m.effectiveness,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Duration,
    Cost,
    Productivity,
    Quality,
    Pressure,
    Effectiveness,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Duration,
        Metric::Cost,
        Metric::Productivity,
        Metric::Quality,
        Metric::Pressure,
        Metric::Effectiveness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Duration => "duration",
            Metric::Cost => "cost",
            Metric::Productivity => "productivity",
            Metric::Quality => "quality",
            Metric::Pressure => "pressure",
            Metric::Effectiveness => "effectiveness",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Factor {
    G,
    D,
    M,
}

impl Factor {
    pub fn name(self) -> &'static str {
        match self {
            Factor::G => "g",
            Factor::D => "d",
            Factor::M => "m",
        }
    }
}

/// A difference of means with its bootstrap interval. `estimate` is None
/// when the factor has a single level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Effect {
    pub estimate: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
}

impl Effect {
    const NOT_ESTIMABLE: Effect = Effect {
        estimate: None,
        ci_lo: None,
        ci_hi: None,
    };

    pub fn estimable(&self) -> bool {
        self.estimate.is_some()
    }

    /// Whether the interval lies strictly on one side of zero.
    pub fn excludes_zero(&self) -> bool {
        matches!((self.ci_lo, self.ci_hi), (Some(lo), Some(hi)) if lo > 0.0 || hi < 0.0)
    }
}

/// `estimate = at_d_max - at_d_min`, where each side is the factor's effect
/// restricted to the extreme d level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    #[serde(flatten)]
    pub effect: Effect,
    pub at_d_min: Effect,
    pub at_d_max: Effect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEffects {
    pub main: BTreeMap<Factor, Effect>,
    pub g_x_d: Interaction,
    pub m_x_d: Interaction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSummary {
    pub rows: usize,
    pub bootstrap_n: usize,
    pub seed: u64,
    pub levels: BTreeMap<Factor, Vec<f64>>,
    pub metrics: BTreeMap<Metric, MetricEffects>,
}

impl EffectSummary {
    pub fn effects(&self, m: Metric) -> &MetricEffects {
        &self.metrics[&m]
    }
}

/// Rows grouped by (g, d, m), cells in ascending level order and rows in
/// replication order, so results do not depend on input order.
struct Cells {
    keys: Vec<[f64; 3]>,
    rows: Vec<Vec<ResultRow>>,
}

impl Cells {
    fn new(table: &ResultTable) -> Self {
        let mut rows = table.rows.clone();
        let key = |r: &ResultRow| [r.g, r.d_target, r.m];
        rows.sort_by(|a, b| {
            let (ka, kb) = (key(a), key(b));
            ka[0]
                .total_cmp(&kb[0])
                .then(ka[1].total_cmp(&kb[1]))
                .then(ka[2].total_cmp(&kb[2]))
                .then(a.rep.cmp(&b.rep))
                .then(a.seed.cmp(&b.seed))
        });
        let mut cells = Cells {
            keys: Vec::new(),
            rows: Vec::new(),
        };
        for r in rows {
            if cells.keys.last() != Some(&key(&r)) {
                cells.keys.push(key(&r));
                cells.rows.push(Vec::new());
            }
            cells.rows.last_mut().unwrap().push(r);
        }
        cells
    }
}

fn factor_pos(f: Factor) -> usize {
    match f {
        Factor::G => 0,
        Factor::D => 1,
        Factor::M => 2,
    }
}

/// A statistic expressed as a difference of pooled means over two sets of cells.
struct Contrast {
    high: Vec<usize>,
    low: Vec<usize>,
}

impl Contrast {
    fn main(cells: &Cells, f: Factor, lo: f64, hi: f64) -> Self {
        Self::filtered(cells, f, lo, hi, |_| true)
    }

    fn filtered(
        cells: &Cells,
        f: Factor,
        lo: f64,
        hi: f64,
        keep: impl Fn(&[f64; 3]) -> bool,
    ) -> Self {
        let p = factor_pos(f);
        let pick = |v: f64| {
            (0..cells.keys.len())
                .filter(|&c| cells.keys[c][p] == v && keep(&cells.keys[c]))
                .collect()
        };
        Contrast {
            high: pick(hi),
            low: pick(lo),
        }
    }

    fn eval(&self, sums: &[f64], counts: &[f64]) -> f64 {
        let mean = |set: &[usize]| {
            let s: f64 = set.iter().map(|&c| sums[c]).sum();
            let n: f64 = set.iter().map(|&c| counts[c]).sum();
            s / n
        };
        mean(&self.high) - mean(&self.low)
    }
}

enum Stat {
    Single(Contrast),
    Diff(Contrast, Contrast),
}

impl Stat {
    fn eval(&self, sums: &[f64], counts: &[f64]) -> f64 {
        match self {
            Stat::Single(c) => c.eval(sums, counts),
            Stat::Diff(a, b) => a.eval(sums, counts) - b.eval(sums, counts),
        }
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos - pos.floor());
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Main effects of g, d and m and the g×d and m×d interactions for every
/// metric, with percentile bootstrap 95% intervals from `bootstrap_n`
/// within-cell resamples.
pub fn summarize(table: &ResultTable, bootstrap_n: usize, seed: u64) -> Result<EffectSummary> {
    if table.rows.is_empty() {
        return Err(Error::Config("cannot summarize an empty table".into()));
    }
    if bootstrap_n < MIN_BOOTSTRAP {
        return Err(Error::Config(format!(
            "bootstrap_n must be at least {MIN_BOOTSTRAP}"
        )));
    }
    let cells = Cells::new(table);
    let mut levels = BTreeMap::new();
    for f in [Factor::G, Factor::D, Factor::M] {
        let mut v: Vec<f64> = table.rows.iter().map(|r| r.level(f)).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        levels.insert(f, v);
    }
    let extremes = |f: Factor| {
        let v = &levels[&f];
        (v.len() > 1).then(|| (v[0], v[v.len() - 1]))
    };

    // Statistic slots: 3 main effects, then for each of g and m: at d min,
    // at d max, difference.
    let mut stats: Vec<Option<Stat>> = Vec::new();
    for f in [Factor::G, Factor::D, Factor::M] {
        stats.push(extremes(f).map(|(lo, hi)| Stat::Single(Contrast::main(&cells, f, lo, hi))));
    }
    for f in [Factor::G, Factor::M] {
        match (extremes(f), extremes(Factor::D)) {
            (Some((lo, hi)), Some((dlo, dhi))) => {
                let at = |dv: f64| Contrast::filtered(&cells, f, lo, hi, move |k| k[1] == dv);
                stats.push(Some(Stat::Single(at(dlo))));
                stats.push(Some(Stat::Single(at(dhi))));
                stats.push(Some(Stat::Diff(at(dhi), at(dlo))));
            }
            _ => stats.extend([None, None, None]),
        }
    }

    let n_cells = cells.keys.len();
    let counts: Vec<f64> = cells.rows.iter().map(|r| r.len() as f64).collect();
    let mut metrics = BTreeMap::new();
    let mut rng = SimRng::new(seed);
    for metric in Metric::ALL {
        let values: Vec<Vec<f64>> = cells
            .rows
            .iter()
            .map(|rs| rs.iter().map(|r| r.metric(metric)).collect())
            .collect();
        let sums: Vec<f64> = values.iter().map(|v| v.iter().sum()).collect();
        let point: Vec<Option<f64>> = stats
            .iter()
            .map(|s| s.as_ref().map(|s| s.eval(&sums, &counts)))
            .collect();

        let mut draws: Vec<Vec<f64>> = vec![Vec::with_capacity(bootstrap_n); stats.len()];
        let mut boot = vec![0.0; n_cells];
        for _ in 0..bootstrap_n {
            for (c, v) in values.iter().enumerate() {
                boot[c] = (0..v.len())
                    .map(|_| v[rng.below(v.len() as u64) as usize])
                    .sum();
            }
            for (k, s) in stats.iter().enumerate() {
                if let Some(s) = s {
                    draws[k].push(s.eval(&boot, &counts));
                }
            }
        }
        let effects: Vec<Effect> = point
            .iter()
            .zip(draws.iter_mut())
            .map(|(p, d)| match p {
                None => Effect::NOT_ESTIMABLE,
                Some(est) => {
                    d.sort_by(f64::total_cmp);
                    Effect {
                        estimate: Some(*est),
                        ci_lo: Some(percentile(d, 0.025).min(*est)),
                        ci_hi: Some(percentile(d, 0.975).max(*est)),
                    }
                }
            })
            .collect();
        let main = BTreeMap::from([
            (Factor::G, effects[0]),
            (Factor::D, effects[1]),
            (Factor::M, effects[2]),
        ]);
        let interaction = |i: usize| Interaction {
            effect: effects[i + 2],
            at_d_min: effects[i],
            at_d_max: effects[i + 1],
        };
        metrics.insert(
            metric,
            MetricEffects {
                main,
                g_x_d: interaction(3),
                m_x_d: interaction(6),
            },
        );
    }

    Ok(EffectSummary {
        rows: table.rows.len(),
        bootstrap_n,
        seed,
        levels,
        metrics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub panel: f64,
    pub level: f64,
    pub metric: &'static str,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Small-multiples series: one panel per level of `panel` (g or d), and
/// within it mean and bootstrap 95% interval of each metric at each level of
/// the other of the two.
pub fn plot_data(
    table: &ResultTable,
    panel: Factor,
    bootstrap_n: usize,
    seed: u64,
) -> Result<Vec<PlotPoint>> {
    let series = match panel {
        Factor::G => Factor::D,
        Factor::D => Factor::G,
        Factor::M => return Err(Error::Config("plot panels are g or d".into())),
    };
    if bootstrap_n < MIN_BOOTSTRAP {
        return Err(Error::Config(format!(
            "bootstrap_n must be at least {MIN_BOOTSTRAP}"
        )));
    }
    let cells = Cells::new(table);
    let mut groups: Vec<((f64, f64), Vec<&ResultRow>)> = Vec::new();
    for r in cells.rows.iter().flatten() {
        let key = (r.level(panel), r.level(series));
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    groups.sort_by(|a, b| a.0 .0.total_cmp(&b.0 .0).then(a.0 .1.total_cmp(&b.0 .1)));

    let mut rng = SimRng::new(seed);
    let mut out = Vec::new();
    for ((p, l), rows) in &groups {
        for metric in Metric::ALL {
            let v: Vec<f64> = rows.iter().map(|r| r.metric(metric)).collect();
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let mut boot: Vec<f64> = (0..bootstrap_n)
                .map(|_| {
                    (0..v.len())
                        .map(|_| v[rng.below(v.len() as u64) as usize])
                        .sum::<f64>()
                        / n
                })
                .collect();
            boot.sort_by(f64::total_cmp);
            out.push(PlotPoint {
                panel: *p,
                level: *l,
                metric: metric.name(),
                mean,
                ci_lo: percentile(&boot, 0.025).min(mean),
                ci_hi: percentile(&boot, 0.975).max(mean),
            });
        }
    }
    Ok(out)
}

pub fn write_plot_csv<W: Write>(points: &[PlotPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["panel", "level", "metric", "mean", "ci_lo", "ci_hi"])?;
    for p in points {
        w.write_record([
            p.panel.to_string(),
            p.level.to_string(),
            p.metric.to_string(),
            p.mean.to_string(),
            p.ci_lo.to_string(),
            p.ci_hi.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
