use isac_core::crb_rate::{pcs_point, psc_point, psc_rate, CommModel, CrbScenario, PscOptions, ScenarioRanges};
use isac_core::numerics::PgOptions;
use isac_core::SeededRng;
use rayon::prelude::*;

use super::{Analysis, StageOutput};
use crate::config::Config;
use crate::output::{Cell, Table};

/// Both corner points of the CRB-rate region on random instances, plus a
/// batch of long-block instances for the asymptotic gap.
pub struct CrbRateAnalysis;

const COLUMNS: [&str; 19] = [
    "instance",
    "group",
    "point",
    "T",
    "K",
    "M",
    "rate_bits",
    "crb",
    "crb_std_error",
    "crb_lower",
    "crb_upper",
    "rank",
    "within_bounds",
    "c0_nats",
    "kkt_residual",
    "restart_spread",
    "low_snr",
    "converged",
    "singular_draws",
];

struct InstanceRows {
    rows: Vec<Vec<Cell>>,
    flagged: Option<String>,
}

fn solve_instance(
    cfg: &Config,
    index: usize,
    group: &str,
    t: usize,
    n_mc: usize,
    with_sc: bool,
    rng: SeededRng,
) -> isac_core::Result<InstanceRows> {
    let c = &cfg.crb_rate;
    let ranges = ScenarioRanges {
        max_params: c.max_params,
        max_antennas: c.max_antennas,
        max_blocks: c.max_blocks,
        prior_scale: c.prior_scale,
        power: c.power,
        noise_c: c.noise_c,
        noise_s: c.noise_s,
    };
    let sc = CrbScenario::random(&ranges, t, rng.fork("scenario"))?;
    let (k, m) = (sc.map.params(), sc.map.inputs());
    let head = |point: &str| -> Vec<Cell> {
        vec![index.into(), group.into(), point.into(), t.into(), k.into(), m.into()]
    };

    let cs = pcs_point(&sc.map, &CommModel::Fixed(sc.comm.clone()), sc.power, sc.noise_s, t, n_mc, rng.fork("pcs"))?;
    let mut row = head("CS");
    row.extend([
        cs.rate_bits.into(),
        cs.eps_mc.mean.into(),
        cs.eps_mc.std_error.into(),
        cs.eps_lower.into(),
        cs.eps_upper.into(),
        cs.rank.into(),
        cs.within_bounds.into(),
        Cell::Empty,
        Cell::Empty,
        Cell::Empty,
        Cell::Empty,
        true.into(),
        cs.eps_mc.singular_draws.into(),
    ]);
    let mut rows = vec![row];
    let mut flagged = None;

    if with_sc {
        let opts = PscOptions { restarts: c.restarts, pg: PgOptions { max_iters: c.pg_max_iters, ..PgOptions::default() } };
        let sc_point = psc_point(&sc.map, sc.power, sc.noise_s, t, opts, rng.fork("psc"))?;
        let rate = psc_rate(&sc_point.cov_sc, std::slice::from_ref(&sc.comm), t)?;
        let mut row = head("SC");
        row.extend([
            rate.rate_bits.into(),
            sc_point.eps_min.into(),
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            sc_point.rank.into(),
            Cell::Empty,
            rate.c0_nats.into(),
            sc_point.kkt_residual.into(),
            sc_point.restart_spread().into(),
            rate.low_snr.into(),
            sc_point.converged.into(),
            Cell::Empty,
        ]);
        rows.push(row);
        if !sc_point.converged {
            flagged = Some(format!("instance {index}: a P_SC restart hit the iteration cap"));
        }
    }
    Ok(InstanceRows { rows, flagged })
}

impl Analysis for CrbRateAnalysis {
    fn name(&self) -> &'static str {
        "crb-rate"
    }

    fn run(&self, cfg: &Config, rng: SeededRng) -> isac_core::Result<StageOutput> {
        let c = &cfg.crb_rate;
        let main = rng.fork("instances");
        let large = rng.fork("large-block-instances");
        let mut jobs: Vec<(usize, &str, usize, usize, bool, SeededRng)> = (0..c.instances)
            .map(|i| (i, "main", c.block_lengths[i % c.block_lengths.len()], c.n_mc, true, main.stream(i as u64)))
            .collect();
        jobs.extend(
            (0..c.large_block_instances)
                .map(|i| (i, "large_t", c.large_block_length, c.large_block_n_mc, false, large.stream(i as u64))),
        );
        let results = jobs
            .into_par_iter()
            .map(|(i, group, t, n_mc, with_sc, r)| solve_instance(cfg, i, group, t, n_mc, with_sc, r))
            .collect::<isac_core::Result<Vec<_>>>()?;

        let mut table = Table::new("crb_rate", &COLUMNS);
        let mut flagged = Vec::new();
        for r in results {
            r.rows.into_iter().for_each(|row| table.push(row));
            flagged.extend(r.flagged);
        }
        Ok(StageOutput { tables: vec![table], flagged })
    }
}
