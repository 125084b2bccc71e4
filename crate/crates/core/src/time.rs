//! UTC instants and calendar days as plain integers.
//!
//! Calendar formatting and parsing live in the companion crate; the core only
//! needs ordering and the day an instant falls on.

/// Seconds since 1970-01-01T00:00:00Z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(pub i64);

/// Days since 1970-01-01 (UTC).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Day(pub i64);

pub const SECONDS_PER_DAY: i64 = 86_400;

impl Timestamp {
    pub fn day(self) -> Day {
        Day(self.0.div_euclid(SECONDS_PER_DAY))
    }
}

impl Day {
    pub fn start(self) -> Timestamp {
        Timestamp(self.0 * SECONDS_PER_DAY)
    }

    /// Instant at `hours` past midnight.
    pub fn at_hour(self, hours: i64) -> Timestamp {
        Timestamp(self.0 * SECONDS_PER_DAY + hours * 3600)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn day_of_negative_instant_rounds_down() {
        assert_eq!(Timestamp(-1).day(), Day(-1));
        assert_eq!(Timestamp(0).day(), Day(0));
        assert_eq!(Timestamp(86_399).day(), Day(0));
        assert_eq!(Day(3).at_hour(18).day(), Day(3));
    }
}
