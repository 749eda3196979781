use isac_core::ranging_zzb::{crb_delay, rms_bandwidth, zzb_optimal_psd, ZzbSearch, ZzbSetup, SPEED_OF_LIGHT};
use isac_core::SeededRng;

use super::{Analysis, StageOutput};
use crate::config::{db_to_linear, Config};
use crate::output::Table;

/// ZZB-optimal spectra over an SNR sweep.
pub struct ZzbAnalysis;

/// File stem for one SNR point, e.g. `zzb_psd_snr_m10db`.
pub fn psd_file_stem(snr_db: f64) -> String {
    let label = format!("{snr_db}").replace('-', "m").replace('.', "p");
    format!("zzb_psd_snr_{label}db")
}

impl Analysis for ZzbAnalysis {
    fn name(&self) -> &'static str {
        "zzb"
    }

    fn run(&self, cfg: &Config, rng: SeededRng) -> isac_core::Result<StageOutput> {
        let c = &cfg.zzb;
        let setup = ZzbSetup {
            n_bins: c.n_bins,
            f_high: c.f_high_hz,
            eps_max: c.eps_max_m.unwrap_or(10.0 * SPEED_OF_LIGHT / c.f_high_hz),
            lag_points: c.lag_points,
            c: SPEED_OF_LIGHT,
        };
        let search = ZzbSearch { restarts: c.restarts, max_iters: c.max_iters, tol: c.tol };
        let base = rng.fork("snr-points");

        let mut summary = Table::new(
            "zzb_summary",
            &[
                "snr_db",
                "psd_file_stem",
                "zzb_m2",
                "crb_m2",
                "rms_bandwidth_hz",
                "frac_above_half",
                "frac_top_quarter",
                "converged_restarts",
                "restarts",
                "flagged",
            ],
        );
        let mut tables = Vec::new();
        let mut flagged = Vec::new();
        for (k, &snr_db) in c.snr_db.iter().enumerate() {
            let snr = db_to_linear(snr_db);
            let opt = zzb_optimal_psd(snr, &setup, &search, base.stream(k as u64))?;
            let stem = psd_file_stem(snr_db);
            let mut psd = Table::new(stem.clone(), &["f_hz", "psd_value"]);
            for (f, p) in opt.psd.freqs().iter().zip(opt.psd.power()) {
                psd.push(vec![(*f).into(), (*p).into()]);
            }
            let beta = rms_bandwidth(&opt.psd);
            summary.push(vec![
                snr_db.into(),
                stem.clone().into(),
                opt.value.into(),
                crb_delay(beta, snr, SPEED_OF_LIGHT).ok().into(),
                beta.into(),
                opt.psd.fraction_above(0.5 * c.f_high_hz).into(),
                opt.psd.fraction_above(0.75 * c.f_high_hz).into(),
                opt.converged_restarts.into(),
                c.restarts.into(),
                opt.flagged.into(),
            ]);
            if opt.flagged {
                flagged.push(format!("{snr_db} dB: no restart met the stopping rule"));
            }
            tables.push(psd);
        }
        tables.push(summary);
        Ok(StageOutput { tables, flagged })
    }
}
