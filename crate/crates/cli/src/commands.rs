use anyhow::{bail, Context, Result};
use purify_core::combinatorics::{CodeParams, SqueezingSpec};
use purify_core::fock_sim::{
    encode_maximally_entangled, linear_optics_purify, linear_optics_purify_with_cutoff, rci_numeric, ChannelModel,
};
use purify_core::gaussian::{devetak_winter_rate, swap_chain, swap_chain_nu, Direction, KeyRateInputs};
use purify_core::rates::{
    iterative_rate, optimize_repeater_chain, optimize_single_shot, plob_capacity, repeater_chain_rate,
    single_shot_rate, LinkSpec, RateResult,
};
use purify_core::verify::{run_standard, Report};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::Format;
use crate::args::{parse_distances, Reconciliation, SweepArgs};
use crate::table::{num, write_csv, write_json, RateRow, RateTable};

const SINGLE_SHOT_K_MAX: u32 = 300;
const SINGLE_SHOT_M_MAX: u32 = 30;
const ITERATE_K_MAX: u32 = 4;
const ITERATE_M_MAX: u32 = 5;

/// A grid point: distance if the sweep is over distance, and transmissivity.
#[derive(Debug, Clone, Copy)]
struct Point {
    distance_km: Option<f64>,
    eta: f64,
}

fn grid(a: &SweepArgs) -> Result<Vec<Point>> {
    if let Some(eta) = a.eta {
        if !(0.0..=1.0).contains(&eta) {
            bail!("--eta {eta} outside [0,1]");
        }
        return Ok(vec![Point { distance_km: None, eta }]);
    }
    parse_distances(&a.distance_km)?
        .into_iter()
        .map(|d| {
            let eta = LinkSpec::new(d, a.loss_db_per_km)?.eta();
            Ok(Point { distance_km: Some(d), eta })
        })
        .collect()
}

fn fixed_code(a: &SweepArgs) -> Result<Option<CodeParams>> {
    match (a.k, a.m) {
        (Some(k), Some(m)) => Ok(Some(CodeParams::new(k, m)?)),
        (None, None) => Ok(None),
        _ => bail!("--k and --m must be given together"),
    }
}

fn rate_row(pt: Point, p: CodeParams, r: &RateResult) -> RateRow {
    RateRow {
        distance_km: pt.distance_km,
        eta: pt.eta,
        k: Some(p.k),
        m: Some(p.m),
        rate: Some(r.rate),
        capacity: r.capacity,
        ratio: Some(r.ratio),
        probability: Some(r.probability),
        qubit_rate: None,
    }
}

pub fn capacity(a: &SweepArgs) -> Result<RateTable> {
    let rows = grid(a)?
        .into_par_iter()
        .map(|pt| {
            Ok(RateRow {
                distance_km: pt.distance_km,
                eta: pt.eta,
                k: None,
                m: None,
                rate: None,
                capacity: plob_capacity(pt.eta)?,
                ratio: None,
                probability: None,
                qubit_rate: None,
            })
        })
        .collect::<Result<_>>()?;
    Ok(RateTable { rows, qubit_column: false })
}

pub fn single_shot(a: &SweepArgs) -> Result<RateTable> {
    let fixed = fixed_code(a)?;
    let (k_max, m_max) = (a.k_max.unwrap_or(SINGLE_SHOT_K_MAX), a.m_max.unwrap_or(SINGLE_SHOT_M_MAX));
    if a.links == 0 {
        bail!("--links must be >= 1");
    }
    if a.links > 1 && a.eta.is_some() {
        bail!("repeater chains need a distance grid, not --eta");
    }
    let rows = grid(a)?
        .into_par_iter()
        .map(|pt| {
            let (p, r) = if a.links > 1 {
                let total = LinkSpec::new(pt.distance_km.unwrap_or(0.0), a.loss_db_per_km)?;
                match fixed {
                    Some(p) => (p, repeater_chain_rate(total, a.links, p)?),
                    None => optimize_repeater_chain(total, a.links, k_max, m_max)?,
                }
            } else {
                match fixed {
                    Some(p) => (p, single_shot_rate(p, pt.eta)?),
                    None => optimize_single_shot(pt.eta, k_max, m_max)?,
                }
            };
            let mut row = rate_row(pt, p, &r);
            row.qubit_rate = Some(pt.eta / 2.0);
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(RateTable { rows, qubit_column: true })
}

pub fn iterate(a: &SweepArgs) -> Result<RateTable> {
    let fixed = fixed_code(a)?;
    let candidates: Vec<CodeParams> = match fixed {
        Some(p) => vec![p],
        None => {
            let (k_max, m_max) = (a.k_max.unwrap_or(ITERATE_K_MAX), a.m_max.unwrap_or(ITERATE_M_MAX));
            let mut v = Vec::new();
            for k in 1..=k_max {
                for m in 2..=m_max {
                    v.push(CodeParams::new(k, m)?);
                }
            }
            v
        }
    };
    if candidates.is_empty() {
        bail!("empty (k, m) search range");
    }
    let rows = grid(a)?
        .into_par_iter()
        .map(|pt| {
            let mut best: Option<(CodeParams, RateResult)> = None;
            for &p in &candidates {
                let it = iterative_rate(p.k, p.m, pt.eta)?;
                // Strict comparison keeps the smallest (k, m) on ties.
                if best.as_ref().is_none_or(|(_, b)| it.result.rate > b.rate) {
                    best = Some((p, it.result));
                }
            }
            let (p, r) = best.expect("candidates are nonempty");
            Ok(rate_row(pt, p, &r))
        })
        .collect::<Result<_>>()?;
    Ok(RateTable { rows, qubit_column: false })
}

pub fn fock(a: &SweepArgs) -> Result<RateTable> {
    let p = CodeParams::new(a.k.unwrap_or(1), a.m.unwrap_or(2))?;
    let input = encode_maximally_entangled(p)?;
    let alice: Vec<usize> = (0..p.m as usize).collect();
    let rows = grid(a)?
        .into_par_iter()
        .map(|pt| {
            let channel = ChannelModel::new(pt.eta, a.nbar, a.eta_eff, a.dark)?;
            let capacity = plob_capacity(pt.eta)?;
            if pt.eta == 0.0 && channel.is_noiseless() {
                let r = RateResult::new(0.0, 0.0, 0.0, capacity);
                return Ok(rate_row(pt, p, &r));
            }
            let out = match a.cutoff {
                Some(c) => linear_optics_purify_with_cutoff(p, &channel, &input, c)?,
                None => linear_optics_purify(p, &channel, &input)?,
            };
            let rci = rci_numeric(&out.output, &alice)?;
            // A negative coherent information distils nothing.
            let ent = rci.max(0.0);
            let rate = out.success_probability * ent / p.m as f64;
            Ok(rate_row(pt, p, &RateResult::new(rate, out.success_probability, ent, capacity)))
        })
        .collect::<Result<_>>()?;
    Ok(RateTable { rows, qubit_column: false })
}

#[derive(Debug, Clone, Serialize)]
pub struct SwapRow {
    pub links: u32,
    pub nu: f64,
    pub key_rate: f64,
    pub raw_key_rate: f64,
    pub mutual_information: f64,
    pub holevo: f64,
    pub beta: f64,
    pub direction: &'static str,
}

pub fn swap(a: &SweepArgs) -> Result<Vec<SwapRow>> {
    let nu = match (a.nu, a.chi) {
        (Some(nu), None) => nu,
        (None, Some(chi)) => SqueezingSpec::new(chi)?.nu(),
        (None, None) => bail!("swap needs --nu or --chi"),
        (Some(_), Some(_)) => bail!("give only one of --nu and --chi"),
    };
    if a.links == 0 {
        bail!("--links must be >= 1");
    }
    let direction = match a.direction {
        Reconciliation::Reverse => Direction::Reverse,
        Reconciliation::Direct => Direction::Direct,
    };
    let inputs = KeyRateInputs::new(a.beta, direction)?;
    (1..=a.links)
        .map(|l| {
            let k = devetak_winter_rate(&swap_chain(nu, l)?, inputs)?;
            Ok(SwapRow {
                links: l,
                nu: swap_chain_nu(nu, l)?,
                key_rate: k.rate,
                raw_key_rate: k.raw,
                mutual_information: k.mutual_information,
                holevo: k.holevo,
                beta: k.beta,
                direction: match direction {
                    Direction::Reverse => "reverse",
                    Direction::Direct => "direct",
                },
            })
        })
        .collect()
}

pub fn write_swap(rows: &[SwapRow], format: Format, out: impl std::io::Write) -> Result<()> {
    match format {
        Format::Json => write_json(rows, out),
        Format::Csv => {
            let header =
                ["links", "nu", "key_rate", "raw_key_rate", "mutual_information", "holevo", "beta", "direction"];
            let records: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.links.to_string(),
                        num(r.nu),
                        num(r.key_rate),
                        num(r.raw_key_rate),
                        num(r.mutual_information),
                        num(r.holevo),
                        num(r.beta),
                        r.direction.to_string(),
                    ]
                })
                .collect();
            write_csv(&header, &records, out)
        }
    }
}

pub fn verify() -> Result<Report> {
    run_standard().context("running verification suite")
}
