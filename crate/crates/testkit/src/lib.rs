//! Reference oracles for the test suites.
//!
//! Everything here works on plain integers and floats and shares no code with
//! `breakout-core`, so the suites compare two independent routes to the same
//! numbers.

// Index loops keep the brute-force oracles literal.
#![allow(clippy::needless_range_loop)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Whole-timeline segmentation of one participant's `(t, volume)` samples,
/// sorted by time. Materializes a 1 ms boolean timeline (true where some
/// sample at that instant is at or above `threshold`), fills every false
/// stretch whose neighbouring true instants are at most `merge_gap` apart,
/// cuts maximal true runs, then drops runs shorter than `min_len`.
pub fn segment_timeline(samples: &[(u64, f64)], threshold: f64, merge_gap: u64, min_len: u64) -> Vec<(u64, u64)> {
    let Some(&(origin, _)) = samples.first() else {
        return Vec::new();
    };
    let last = samples.last().unwrap().0;
    let mut line = vec![false; (last - origin + 1) as usize];
    for &(t, v) in samples {
        if v >= threshold {
            line[(t - origin) as usize] = true;
        }
    }

    let trues: Vec<usize> = (0..line.len()).filter(|&i| line[i]).collect();
    for pair in trues.windows(2) {
        if (pair[1] - pair[0]) as u64 <= merge_gap {
            for cell in &mut line[pair[0]..pair[1]] {
                *cell = true;
            }
        }
    }

    let mut runs = Vec::new();
    let mut i = 0;
    while i < line.len() {
        if !line[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < line.len() && line[i + 1] {
            i += 1;
        }
        runs.push((origin + start as u64, origin + i as u64));
        i += 1;
    }
    runs.into_iter().filter(|&(s, e)| e - s >= min_len).collect()
}

/// Counts each `(from, to)` speaker pair over consecutive positions.
pub fn count_pairs(sequence: &[usize], n: usize) -> Vec<Vec<u64>> {
    let mut counts = vec![vec![0u64; n]; n];
    for k in 0..sequence.len().saturating_sub(1) {
        for i in 0..n {
            for j in 0..n {
                if sequence[k] == i && sequence[k + 1] == j {
                    counts[i][j] += 1;
                }
            }
        }
    }
    counts
}

pub const CELL_MS: u64 = 10;

/// A segment on the oracle's timeline: `(participant name, start, end)`.
pub type RawSegment = (String, u64, u64);

#[derive(Debug, Clone, PartialEq)]
pub struct OracleStats {
    pub speaking_events: BTreeMap<String, u64>,
    pub speaking_time_ms: BTreeMap<String, u64>,
    pub turns: BTreeMap<String, u64>,
    /// Indexed like `present`.
    pub transition_counts: Vec<Vec<u64>>,
    pub turn_taking_per_min: f64,
    pub overlap_pct: f64,
}

/// Recomputes every windowed statistic from a 10 ms occupancy grid.
///
/// `present` lists participants in layout order; segments of anyone else still
/// take part in the union/overlap and in turn ordering but get no map entry.
pub fn stats_by_discretization(
    segments: &[RawSegment],
    present: &[String],
    window: (u64, u64),
    window_ms: u64,
    turn_merge_gap: u64,
) -> OracleStats {
    let (from, to) = window;
    let origin = segments.iter().map(|s| s.1).min().unwrap_or(from).min(from) / CELL_MS * CELL_MS;
    let cells = ((to.max(origin) - origin) / CELL_MS + 1) as usize;

    let mut names: Vec<String> = segments.iter().map(|s| s.0.clone()).collect();
    names.extend(present.iter().cloned());
    names.sort();
    names.dedup();
    let mut grid: BTreeMap<&str, Vec<bool>> = names.iter().map(|n| (n.as_str(), vec![false; cells])).collect();
    for (p, s, e) in segments {
        let row = grid.get_mut(p.as_str()).unwrap();
        let mut t = *s;
        while t < *e && t < origin + cells as u64 * CELL_MS {
            row[((t - origin) / CELL_MS) as usize] = true;
            t += CELL_MS;
        }
    }
    let cell_time = |i: usize| origin + i as u64 * CELL_MS;
    let in_window = |t: u64| from <= t && t < to;

    // rising edges are segment starts
    let runs_of = |row: &Vec<bool>| {
        let mut runs = Vec::new();
        let mut i = 0;
        while i < row.len() {
            if row[i] {
                let s = i;
                while i < row.len() && row[i] {
                    i += 1;
                }
                runs.push((cell_time(s), cell_time(i)));
            } else {
                i += 1;
            }
        }
        runs
    };

    let mut speaking_events = BTreeMap::new();
    let mut speaking_time_ms = BTreeMap::new();
    let mut turn_count = BTreeMap::new();
    let mut all_turns: Vec<(u64, String)> = Vec::new();
    for name in &names {
        let row = &grid[name.as_str()];
        let runs = runs_of(row);
        let events = runs.iter().filter(|r| in_window(r.0)).count() as u64;
        let time = (0..cells).filter(|&i| row[i] && in_window(cell_time(i))).count() as u64 * CELL_MS;

        let mut turns: Vec<(u64, u64)> = Vec::new();
        for (s, e) in runs {
            match turns.last_mut() {
                Some(last) if s - last.1 <= turn_merge_gap => last.1 = e,
                _ => turns.push((s, e)),
            }
        }
        let starting: Vec<u64> = turns.iter().map(|t| t.0).filter(|&s| in_window(s)).collect();
        if present.contains(name) {
            speaking_events.insert(name.clone(), events);
            speaking_time_ms.insert(name.clone(), time);
            turn_count.insert(name.clone(), starting.len() as u64);
        }
        all_turns.extend(starting.into_iter().map(|s| (s, name.clone())));
    }
    all_turns.sort();

    let mut transition_counts = vec![vec![0u64; present.len()]; present.len()];
    for k in 1..all_turns.len() {
        let a = present.iter().position(|p| *p == all_turns[k - 1].1);
        let b = present.iter().position(|p| *p == all_turns[k].1);
        if let (Some(a), Some(b)) = (a, b) {
            transition_counts[a][b] += 1;
        }
    }

    let mut union = 0u64;
    let mut overlap = 0u64;
    for i in 0..cells {
        if !in_window(cell_time(i)) {
            continue;
        }
        let active = names.iter().filter(|n| grid[n.as_str()][i]).count();
        if active >= 1 {
            union += 1;
        }
        if active >= 2 {
            overlap += 1;
        }
    }

    OracleStats {
        speaking_events,
        speaking_time_ms,
        turns: turn_count,
        transition_counts,
        turn_taking_per_min: all_turns.len() as f64 * 60_000.0 / window_ms as f64,
        overlap_pct: if union == 0 { 0.0 } else { overlap as f64 / union as f64 },
    }
}

/// Random volume stream for one participant: bursts of loud samples with
/// random lengths, random dips, and occasionally missing samples.
pub fn random_volume_stream(rng: &mut ChaCha8Rng, period: u64, len: usize) -> Vec<(u64, f64)> {
    let mut out = Vec::with_capacity(len);
    let mut t = rng.random_range(0..5) * period;
    let mut loud = rng.random_bool(0.5);
    let mut remaining = 0usize;
    while out.len() < len {
        if remaining == 0 {
            loud = !loud;
            remaining = rng.random_range(1..30);
        }
        remaining -= 1;
        let v: f64 = if loud { rng.random_range(0.2..=1.0) } else { rng.random_range(0.0..0.3) };
        if !rng.random_bool(0.05) {
            out.push((t, v));
        }
        t += period;
        // occasional duplicate timestamp
        if rng.random_bool(0.02) {
            out.push((t - period, v));
        }
    }
    out
}

/// Segmenter parameters as plain numbers.
#[derive(Debug, Clone, Copy)]
pub struct SegParams {
    pub threshold: f64,
    pub merge_gap: u64,
    pub min_len: u64,
    pub period: u64,
}

/// Random parameters that still satisfy the segmenter's config rules.
pub fn random_seg_params(rng: &mut ChaCha8Rng) -> SegParams {
    let period = rng.random_range(1..=5) * 10;
    SegParams {
        threshold: rng.random_range(0.05..0.6),
        merge_gap: rng.random_range(period..=10 * period),
        min_len: rng.random_range(period..=20 * period),
        period,
    }
}

/// Random segments on the 10 ms grid for `n` participants named `p0..`,
/// each participant's segments disjoint and ordered.
pub fn random_segments(rng: &mut ChaCha8Rng, n: usize, span: u64) -> Vec<RawSegment> {
    let mut out = Vec::new();
    for p in 0..n {
        let mut t = rng.random_range(0..(span / 4).max(1)) / CELL_MS * CELL_MS;
        while t < span {
            let len = rng.random_range(50..800) * CELL_MS;
            out.push((format!("p{p}"), t, t + len));
            t += len + rng.random_range(1..600) * CELL_MS;
        }
    }
    out
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Largest row-wise L1 distance between two square matrices.
pub fn max_row_l1(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x - y).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
