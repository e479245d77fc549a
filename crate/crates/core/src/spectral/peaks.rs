use serde::{Deserialize, Serialize};

use super::Spectrum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub frequency_hz: f64,
    pub magnitude: f64,
    pub bin: usize,
}

/// Peaks sorted by magnitude, largest first.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PeakSet {
    pub peaks: Vec<Peak>,
}

impl PeakSet {
    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.peaks.iter().map(|p| p.frequency_hz).collect()
    }
}

/// Strict local maxima; an endpoint counts when it exceeds its only neighbour.
pub fn local_maxima(mag: &[f64]) -> Vec<usize> {
    let n = mag.len();
    (0..n)
        .filter(|&j| (j == 0 || mag[j] > mag[j - 1]) && (j + 1 == n || mag[j] > mag[j + 1]))
        .collect()
}

fn by_magnitude(mag: &[f64], idx: &mut [usize]) {
    idx.sort_by(|&a, &b| mag[b].total_cmp(&mag[a]).then(a.cmp(&b)));
}

/// The `count` largest strict local maxima of |bins|, each at least
/// `min_separation_bins` away from every larger accepted peak.
pub fn pick_peaks(s: &Spectrum, count: usize, min_separation_bins: usize) -> PeakSet {
    let mag = s.magnitudes();
    let mut idx = local_maxima(&mag);
    by_magnitude(&mag, &mut idx);
    let mut chosen: Vec<usize> = Vec::new();
    for j in idx {
        if chosen.len() >= count {
            break;
        }
        if chosen.iter().all(|&c| c.abs_diff(j) >= min_separation_bins) {
            chosen.push(j);
        }
    }
    PeakSet {
        peaks: chosen.into_iter().map(|j| Peak { frequency_hz: s.frequency(j), magnitude: mag[j], bin: j }).collect(),
    }
}

/// Interior strict maxima inside `[lo, hi]` whose magnitude is at least
/// `rel` times the largest of them, largest first.
pub fn significant_peaks(s: &Spectrum, lo_hz: f64, hi_hz: f64, rel: f64) -> PeakSet {
    let band = s.band(lo_hz, hi_hz);
    let mag = band.magnitudes();
    let mut idx: Vec<usize> = (1..mag.len().saturating_sub(1)).filter(|&j| mag[j] > mag[j - 1] && mag[j] > mag[j + 1]).collect();
    by_magnitude(&mag, &mut idx);
    let top = idx.first().map_or(0.0, |&j| mag[j]);
    let offset = s.band_indices(lo_hz, hi_hz).start;
    PeakSet {
        peaks: idx
            .into_iter()
            .filter(|&j| mag[j] >= rel * top)
            .map(|j| Peak { frequency_hz: band.frequency(j), magnitude: mag[j], bin: j + offset })
            .collect(),
    }
}

/// Two-frequency readout on a `grid_hz` lattice. Uses the two largest
/// significant maxima; a single merged maximum is paired with its larger
/// neighbour; with none, the two largest bins. Result is ascending.
pub fn two_tone_estimate(s: &Spectrum, lo_hz: f64, hi_hz: f64, rel: f64, grid_hz: f64) -> Option<[f64; 2]> {
    let band = s.band(lo_hz, hi_hz);
    let mag = band.magnitudes();
    if mag.len() < 2 {
        return None;
    }
    let sig = significant_peaks(&band, lo_hz, hi_hz, rel);
    let pair = match sig.peaks.as_slice() {
        [a, b, ..] => [a.bin, b.bin],
        [a] => {
            let j = a.bin;
            // An interior maximum always has both neighbours.
            [j, if mag[j - 1] > mag[j + 1] { j - 1 } else { j + 1 }]
        }
        [] => {
            let mut idx: Vec<usize> = (0..mag.len()).collect();
            by_magnitude(&mag, &mut idx);
            [idx[0], idx[1]]
        }
    };
    let mut f = pair.map(|j| (band.frequency(j) / grid_hz).round() * grid_hz);
    f.sort_by(f64::total_cmp);
    Some(f)
}
