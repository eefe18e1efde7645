use std::f64::consts::TAU;

use chrono::{Duration, FixedOffset, TimeZone};

use super::{RawSeries, PREDISPATCH_COLUMNS};
use crate::error::{Error, Result};
use crate::numeric::{sigmoid, Rng};

pub const MIN_SYNTHETIC_ROWS: usize = 200;

const STEPS_PER_DAY: usize = 48;

#[derive(Clone, Copy, PartialEq)]
enum Regime {
    Normal,
    Spike,
    Negative,
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Synthetic half-hourly market series, fully determined by `seed`.
///
/// Demand is a positive baseline with daily and weekly cycles plus AR(1)
/// noise. Price is affine in demand with a scarcity premium, a heavy-tailed
/// spike regime that becomes likelier at high demand, and a midday
/// negative-price regime. Predispatch columns track the targets: demand
/// forecasts are tight, price forecasts only partially anticipate spikes.
pub fn gen_synthetic(n: usize, seed: u64) -> Result<RawSeries> {
    if n < MIN_SYNTHETIC_ROWS {
        return Err(Error::config(format!(
            "synthetic series needs at least {MIN_SYNTHETIC_ROWS} rows, got {n}"
        )));
    }
    let root = Rng::new(seed);
    let mut demand_rng = root.derive("synthetic/demand");
    let mut price_rng = root.derive("synthetic/price");
    let mut pre_rng = root.derive("synthetic/predispatch");

    // 2023-01-02 is a Monday; Adelaide standard time.
    let tz = FixedOffset::east_opt(9 * 3600 + 1800).expect("valid offset");
    let start = tz.with_ymd_and_hms(2023, 1, 2, 0, 0, 0).unwrap();

    let mut timestamps = Vec::with_capacity(n);
    let mut price = Vec::with_capacity(n);
    let mut demand = Vec::with_capacity(n);
    let mut pre: Vec<Vec<f64>> = (0..4).map(|_| Vec::with_capacity(n)).collect();

    let mut ar = 0.0;
    let mut regime = Regime::Normal;
    for i in 0..n {
        timestamps.push(start + Duration::minutes(30 * i as i64));
        let hour = (i % STEPS_PER_DAY) as f64 / 2.0;
        let day = i as f64 / STEPS_PER_DAY as f64;

        ar = 0.95 * ar + 18.0 * demand_rng.normal();
        let cycle = 260.0 * (TAU * (hour - 10.0) / 24.0).sin()
            + 110.0 * (2.0 * TAU * (hour - 7.0) / 24.0).sin()
            + 90.0 * (TAU * day / 7.0).cos();
        let d = (1500.0 + cycle + ar).max(100.0);

        let base = 10.0 + 0.05 * d + 2e-4 * (d - 1600.0).max(0.0).powi(2) + 4.0 * price_rng.normal();
        let midday = (10.0..15.0).contains(&hour);
        let u = price_rng.uniform();
        regime = match regime {
            Regime::Normal => {
                let p_spike = 0.004 + 0.03 * sigmoid((d - 1750.0) / 60.0);
                let p_neg = if midday { 0.03 } else { 0.002 };
                if u < p_spike {
                    Regime::Spike
                } else if u < p_spike + p_neg {
                    Regime::Negative
                } else {
                    Regime::Normal
                }
            }
            Regime::Spike if u < 0.7 => Regime::Spike,
            Regime::Negative if u < 0.85 => Regime::Negative,
            _ => Regime::Normal,
        };
        let p = match regime {
            Regime::Normal => base,
            Regime::Spike => {
                let tail = 150.0 * (1.0 - price_rng.uniform()).powf(-1.0 / 2.2);
                base + tail.min(12_000.0)
            }
            Regime::Negative => -price_rng.uniform_range(5.0, 60.0),
        };
        let p = round2(p);
        let d = round2(d);

        pre[0].push(round2(base + 6.0 * pre_rng.normal()));
        pre[1].push(round2(base + 0.3 * (p - base) + 5.0 * pre_rng.normal()));
        pre[2].push(round2(d + 25.0 * pre_rng.normal()));
        pre[3].push(round2(d + 10.0 * pre_rng.normal()));
        price.push(p);
        demand.push(d);
    }

    Ok(RawSeries {
        timestamps,
        price,
        demand,
        predispatch: PREDISPATCH_COLUMNS
            .iter()
            .map(|s| s.to_string())
            .zip(pre)
            .collect(),
    })
}
