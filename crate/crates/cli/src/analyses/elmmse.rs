use isac_core::elmmse::{
    exponential_correlation, jensen_gap_sweep, paired_std_error, snr_sweep, CodebookSampler, SgdConfig, SweepSetup,
};
use isac_core::SeededRng;

use super::{Analysis, StageOutput};
use crate::config::Config;
use crate::output::{Cell, Table};

/// Precoder comparison over SNR and the Jensen gap over block length.
pub struct ElmmseAnalysis;

impl Analysis for ElmmseAnalysis {
    fn name(&self) -> &'static str {
        "elmmse"
    }

    fn run(&self, cfg: &Config, rng: SeededRng) -> isac_core::Result<StageOutput> {
        let c = &cfg.elmmse;
        let r_h = exponential_correlation(c.tx_antennas, c.correlation, c.rx_antennas)?;
        let setup = SweepSetup {
            r_h: r_h.clone(),
            power: c.power,
            rx_antennas: c.rx_antennas,
            sampler: CodebookSampler::new(c.codebook.into(), c.tx_antennas, c.block_length)?,
            n_mc: c.n_mc,
            sgd: SgdConfig::from(&c.sgd),
            certify: c.certify,
        };
        let names: Vec<&str> = c.schemes.iter().map(String::as_str).collect();
        let rows = snr_sweep(&setup, &c.snr_db, &names, rng.fork("sweep"))?;

        let mut sweep = Table::new(
            "elmmse_sweep",
            &[
                "snr_db",
                "xi_wf",
                "xi_dd",
                "xi_di",
                "stderr_wf",
                "stderr_dd",
                "stderr_di",
                "stderr_dd_minus_di",
                "stderr_di_minus_wf",
                "stderr_dd_minus_wf",
                "sgd_step_constant",
                "dd_flagged_draws",
            ],
        );
        let mut flagged = Vec::new();
        for row in &rows {
            let mean = |n: &str| row.get(n).map(|e| e.mean);
            let se = |n: &str| row.get(n).map(|e| e.std_error);
            let paired = |a: &str, b: &str| Some(paired_std_error(row.scheme(a)?, row.scheme(b)?));
            let dd_flags = row.scheme("dd").map(|s| s.flagged);
            if let Some(n) = dd_flags.filter(|n| *n > 0) {
                flagged.push(format!("{} dB: {n} data-dependent precoders failed certification", row.snr_db));
            }
            let cells: Vec<Cell> = vec![
                row.snr_db.into(),
                mean("wf").into(),
                mean("dd").into(),
                mean("di").into(),
                se("wf").into(),
                se("dd").into(),
                se("di").into(),
                paired("dd", "di").into(),
                paired("di", "wf").into(),
                paired("dd", "wf").into(),
                row.sgd_step_constant.into(),
                dd_flags.into(),
            ];
            sweep.push(cells);
        }

        let mut jensen = Table::new("elmmse_jensen", &["T", "snr_db", "elmmse", "stderr", "jensen_bound", "relative_gap"]);
        if !c.jensen_block_lengths.is_empty() {
            let rows = jensen_gap_sweep(
                &r_h,
                c.power,
                c.jensen_snr_db,
                c.rx_antennas,
                &c.jensen_block_lengths,
                c.jensen_n_mc,
                rng.fork("jensen"),
            )?;
            for r in rows {
                jensen.push(vec![
                    r.t.into(),
                    c.jensen_snr_db.into(),
                    r.estimate.mean.into(),
                    r.estimate.std_error.into(),
                    r.bound.into(),
                    r.relative_gap().into(),
                ]);
            }
        }
        Ok(StageOutput { tables: vec![sweep, jensen], flagged })
    }
}
