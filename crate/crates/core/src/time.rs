use std::fmt;
use std::ops::{Add, Sub};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

/// Milliseconds since the Unix epoch, UTC.
///
/// Serialized as a bare JSON integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub const ZERO: Timestamp = Timestamp(0);

    pub const fn from_millis(ms: u64) -> Self {
        Timestamp(ms)
    }

    pub const fn millis(self) -> u64 {
        self.0
    }

    /// Current wall-clock time.
    pub fn now() -> Self {
        let ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or_default();
        Timestamp(ms)
    }

    pub fn saturating_sub_ms(self, ms: u64) -> Self {
        Timestamp(self.0.saturating_sub(ms))
    }

    pub fn add_ms(self, ms: u64) -> Self {
        Timestamp(self.0 + ms)
    }

    /// Milliseconds from `earlier` to `self`, zero if `earlier` is later.
    pub fn since(self, earlier: Timestamp) -> u64 {
        self.0.saturating_sub(earlier.0)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ms", self.0)
    }
}

impl Add<u64> for Timestamp {
    type Output = Timestamp;
    fn add(self, rhs: u64) -> Timestamp {
        Timestamp(self.0 + rhs)
    }
}

impl Sub for Timestamp {
    type Output = u64;
    fn sub(self, rhs: Timestamp) -> u64 {
        self.since(rhs)
    }
}

/// Half-open time range `[from, to)`, serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[Timestamp; 2]", into = "[Timestamp; 2]")]
pub struct Window {
    pub from: Timestamp,
    pub to: Timestamp,
}

impl Window {
    pub fn new(from: Timestamp, to: Timestamp) -> Self {
        Window { from, to }
    }

    /// The window of length `len_ms` ending at `end`, truncated at the epoch.
    pub fn ending_at(end: Timestamp, len_ms: u64) -> Self {
        Window { from: end.saturating_sub_ms(len_ms), to: end }
    }

    pub fn len_ms(&self) -> u64 {
        self.to.since(self.from)
    }

    pub fn is_empty(&self) -> bool {
        self.to <= self.from
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        self.from <= t && t < self.to
    }

    /// Clip `[start, end)` to the window; `None` if nothing remains.
    pub fn clip(&self, start: Timestamp, end: Timestamp) -> Option<(Timestamp, Timestamp)> {
        let s = start.max(self.from);
        let e = end.min(self.to);
        (s < e).then_some((s, e))
    }
}

impl From<[Timestamp; 2]> for Window {
    fn from([from, to]: [Timestamp; 2]) -> Self {
        Window { from, to }
    }
}

impl From<Window> for [Timestamp; 2] {
    fn from(w: Window) -> Self {
        [w.from, w.to]
    }
}
