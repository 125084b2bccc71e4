//! Station-day smoke exposure panel and the one-way fixed-effects
//! (within) estimator `pm25_it = beta1 * smoke_it + alpha_i + e_it`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::annotations::AnnotationSet;
use crate::error::{Error, Result};
use crate::mask::BitMask;
use crate::time::Day;

#[derive(Debug, Clone, PartialEq)]
pub struct Station {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub crs: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pm25Record {
    pub station_id: String,
    pub date: Day,
    pub pm25: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelObservation {
    pub station_id: String,
    pub date: Day,
    pub pm25: f64,
    pub smoke: u8,
}

/// One smoke source for a day: a predicted or rasterized mask, or polygons.
#[derive(Debug, Clone, PartialEq)]
pub enum Exposure {
    /// Mask with the CRS of its grid.
    Mask(BitMask, String),
    Polygons(AnnotationSet),
}

/// Indicator value plus the number of sources that could not be evaluated
/// (station off-grid or in another CRS).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Indicator {
    pub smoke: u8,
    pub skipped: usize,
}

/// 1 iff any source covers the station. A mask covers it when the pixel
/// containing the station is set.
pub fn smoke_indicator(station: &Station, sources: &[Exposure]) -> Indicator {
    let mut out = Indicator { smoke: 0, skipped: 0 };
    for src in sources {
        let covered = match src {
            Exposure::Mask(mask, crs) => {
                if *crs != station.crs {
                    None
                } else {
                    mask.transform
                        .pixel_of(station.x, station.y, mask.width(), mask.height())
                        .map(|(r, c)| mask.get(r, c))
                }
            }
            Exposure::Polygons(set) => (set.crs == station.crs).then(|| set.covers((station.x, station.y))),
        };
        match covered {
            Some(true) => out.smoke = 1,
            Some(false) => {}
            None => out.skipped += 1,
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Panel {
    /// Sorted by `(station_id, date)`.
    pub rows: Vec<PanelObservation>,
    /// Sources skipped while computing indicators.
    pub skipped_sources: usize,
}

/// Joins PM2.5 readings in `[first, last]` with daily smoke indicators.
/// Days without any source count as smoke-free.
pub fn build_panel(
    stations: &[Station],
    records: &[Pm25Record],
    exposure: &BTreeMap<Day, Vec<Exposure>>,
    (first, last): (Day, Day),
) -> Result<Panel> {
    let mut by_id = BTreeMap::new();
    for s in stations {
        if by_id.insert(s.id.as_str(), s).is_some() {
            return Err(Error::Data(format!("duplicate station {}", s.id)));
        }
    }
    let mut seen = BTreeSet::new();
    let mut keyed = Vec::new();
    for r in records {
        if !seen.insert((r.station_id.as_str(), r.date)) {
            return Err(Error::Data(format!(
                "duplicate PM2.5 record for station {} on day {}",
                r.station_id, r.date.0
            )));
        }
        if !r.pm25.is_finite() || r.pm25 < 0.0 {
            return Err(Error::Data(format!(
                "PM2.5 value {} for station {} on day {}",
                r.pm25, r.station_id, r.date.0
            )));
        }
        let station = by_id
            .get(r.station_id.as_str())
            .ok_or_else(|| Error::Data(format!("unknown station {}", r.station_id)))?;
        if r.date >= first && r.date <= last {
            keyed.push((*station, r));
        }
    }
    keyed.sort_by(|a, b| (a.1.station_id.as_str(), a.1.date).cmp(&(b.1.station_id.as_str(), b.1.date)));
    let mut panel = Panel::default();
    for (station, r) in keyed {
        let ind = exposure
            .get(&r.date)
            .map(|src| smoke_indicator(station, src))
            .unwrap_or(Indicator { smoke: 0, skipped: 0 });
        panel.skipped_sources += ind.skipped;
        panel.rows.push(PanelObservation {
            station_id: r.station_id.clone(),
            date: r.date,
            pm25: r.pm25,
            smoke: ind.smoke,
        });
    }
    Ok(panel)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FEResult {
    pub beta1: f64,
    pub station_effects: BTreeMap<String, f64>,
    pub r2: f64,
    pub adj_r2: f64,
    pub within_r2: f64,
    pub within_adj_r2: f64,
    pub rss: f64,
    pub n_obs: usize,
    pub n_stations: usize,
    /// In panel row order.
    pub residuals: Vec<f64>,
    /// Reserved; not estimated.
    pub std_error: Option<f64>,
}

const K: usize = 1;

struct Groups {
    /// Station index of every row.
    of_row: Vec<usize>,
    ids: Vec<String>,
    counts: Vec<usize>,
}

fn group(panel: &[PanelObservation]) -> Groups {
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    let mut ids = Vec::new();
    let mut counts = Vec::new();
    let of_row = panel
        .iter()
        .map(|o| {
            let next = ids.len();
            let k = *index.entry(o.station_id.as_str()).or_insert_with(|| {
                ids.push(o.station_id.clone());
                counts.push(0);
                next
            });
            counts[k] += 1;
            k
        })
        .collect();
    Groups { of_row, ids, counts }
}

fn group_means(g: &Groups, v: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut sums = vec![0.0; g.ids.len()];
    for (row, &k) in g.of_row.iter().enumerate() {
        sums[k] += v(row);
    }
    sums.iter().zip(&g.counts).map(|(s, &n)| s / n as f64).collect()
}

fn check_dof(n: usize, stations: usize) -> Result<()> {
    if n < 2 || n <= stations + K {
        return Err(Error::Dof {
            n_obs: n,
            n_stations: stations,
            n_regressors: K,
        });
    }
    Ok(())
}

/// Assembles the R² family from residuals and the station grouping.
fn finish(panel: &[PanelObservation], g: &Groups, beta1: f64, alpha: &[f64], residuals: Vec<f64>) -> FEResult {
    let n = panel.len();
    let big_n = g.ids.len();
    let y_bar = panel.iter().map(|o| o.pm25).sum::<f64>() / n as f64;
    let y_means = group_means(g, |i| panel[i].pm25);
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let tss: f64 = panel.iter().map(|o| (o.pm25 - y_bar) * (o.pm25 - y_bar)).sum();
    let tss_w: f64 = panel
        .iter()
        .zip(&g.of_row)
        .map(|(o, &k)| (o.pm25 - y_means[k]) * (o.pm25 - y_means[k]))
        .sum();
    let resid_dof = (n - big_n - K) as f64;
    FEResult {
        beta1,
        station_effects: g.ids.iter().cloned().zip(alpha.iter().copied()).collect(),
        r2: 1.0 - rss / tss,
        adj_r2: 1.0 - (rss / resid_dof) / (tss / (n - 1) as f64),
        within_r2: 1.0 - rss / tss_w,
        within_adj_r2: 1.0 - (rss / resid_dof) / (tss_w / (n - big_n) as f64),
        rss,
        n_obs: n,
        n_stations: big_n,
        residuals,
        std_error: None,
    }
}

/// Within estimator: demean by station, regress, recover the effects.
pub fn fe_fit(panel: &[PanelObservation]) -> Result<FEResult> {
    let g = group(panel);
    check_dof(panel.len(), g.ids.len())?;
    let x = |i: usize| panel[i].smoke as f64;
    let y = |i: usize| panel[i].pm25;
    let x_means = group_means(&g, x);
    let y_means = group_means(&g, y);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (i, &k) in g.of_row.iter().enumerate() {
        let xt = x(i) - x_means[k];
        sxx += xt * xt;
        sxy += xt * (y(i) - y_means[k]);
    }
    if sxx <= 0.0 {
        return Err(Error::NoWithinVariation);
    }
    let beta1 = sxy / sxx;
    let alpha: Vec<f64> = y_means.iter().zip(&x_means).map(|(yb, xb)| yb - beta1 * xb).collect();
    let residuals = g
        .of_row
        .iter()
        .enumerate()
        .map(|(i, &k)| y(i) - alpha[k] - beta1 * x(i))
        .collect();
    Ok(finish(panel, &g, beta1, &alpha, residuals))
}

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty range");
        if a[pivot][col].abs() <= 1e-12 * scale {
            return Err(Error::Singular);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Ok(x)
}

/// Least squares on `[smoke, station dummies]` via dense normal equations.
/// Slow; for cross-checking [`fe_fit`].
pub fn lsdv_oracle(panel: &[PanelObservation]) -> Result<FEResult> {
    let g = group(panel);
    check_dof(panel.len(), g.ids.len())?;
    let p = 1 + g.ids.len();
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for (o, &k) in panel.iter().zip(&g.of_row) {
        let row = |j: usize| -> f64 {
            if j == 0 {
                o.smoke as f64
            } else {
                f64::from(u8::from(j - 1 == k))
            }
        };
        for a in 0..p {
            let ra = row(a);
            if ra == 0.0 {
                continue;
            }
            xty[a] += ra * o.pm25;
            for (b, cell) in xtx[a].iter_mut().enumerate() {
                *cell += ra * row(b);
            }
        }
    }
    let coef = solve(xtx, xty)?;
    let beta1 = coef[0];
    let alpha = &coef[1..];
    let residuals = panel
        .iter()
        .zip(&g.of_row)
        .map(|(o, &k)| o.pm25 - alpha[k] - beta1 * o.smoke as f64)
        .collect();
    Ok(finish(panel, &g, beta1, alpha, residuals))
}
