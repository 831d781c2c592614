//! Global feature vector: a fixed-slot snapshot of the whole fleet plus
//! calendar one-hots.
//!
//! The slot layout is sized to the maximum fleet so the network input
//! dimension stays constant as nodes join and leave. Each slot carries
//! `[activity flag, cpu fraction, ram fraction]`; inactive slots are zero.

/// Maximum fleet size the slot layout is dimensioned for.
pub const DEFAULT_FLEET_CAPACITY: usize = 20;

pub const SLOT_WIDTH: usize = 3;
pub const DAY_ONE_HOT: usize = 7;
pub const PART_ONE_HOT: usize = 4;

/// Utilization snapshot of one fleet slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeSlot {
    pub cpu_percent: f64,
    pub ram_percent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalFeatures {
    pub values: Vec<f64>,
}

impl GlobalFeatures {
    pub fn dim(fleet_capacity: usize) -> usize {
        fleet_capacity * SLOT_WIDTH + DAY_ONE_HOT + PART_ONE_HOT
    }

    /// `slots[i]` is `Some` when fleet slot `i` is active at `timestamp`.
    pub fn build(slots: &[Option<NodeSlot>], timestamp: i64) -> Self {
        let mut values = Vec::with_capacity(Self::dim(slots.len()));
        for slot in slots {
            match slot {
                Some(s) => {
                    values.push(1.0);
                    values.push(s.cpu_percent / 100.0);
                    values.push(s.ram_percent / 100.0);
                }
                None => values.extend_from_slice(&[0.0, 0.0, 0.0]),
            }
        }
        let mut day = [0.0; DAY_ONE_HOT];
        day[day_of_week(timestamp)] = 1.0;
        values.extend_from_slice(&day);
        let mut part = [0.0; PART_ONE_HOT];
        part[part_of_day(timestamp)] = 1.0;
        values.extend_from_slice(&part);
        GlobalFeatures { values }
    }
}

/// Day of week with Monday = 0. 1970-01-01 was a Thursday.
pub fn day_of_week(timestamp: i64) -> usize {
    let days = timestamp.div_euclid(86_400);
    (days + 3).rem_euclid(7) as usize
}

/// Four six-hour buckets starting at 00:00:
/// night / morning / afternoon / evening.
pub fn part_of_day(timestamp: i64) -> usize {
    (timestamp.rem_euclid(86_400) / 21_600) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_was_a_thursday() {
        assert_eq!(day_of_week(0), 3);
        assert_eq!(day_of_week(86_400), 4); // Friday
        assert_eq!(day_of_week(4 * 86_400), 0); // Monday 1970-01-05
        assert_eq!(day_of_week(-86_400), 2); // Wednesday 1969-12-31
    }

    #[test]
    fn part_of_day_buckets() {
        assert_eq!(part_of_day(0), 0);
        assert_eq!(part_of_day(6 * 3600), 1);
        assert_eq!(part_of_day(12 * 3600), 2);
        assert_eq!(part_of_day(18 * 3600), 3);
        assert_eq!(part_of_day(23 * 3600 + 3599), 3);
    }

    #[test]
    fn one_hot_groups_sum_to_one() {
        let slots = vec![
            Some(NodeSlot {
                cpu_percent: 50.0,
                ram_percent: 25.0,
            }),
            None,
            Some(NodeSlot {
                cpu_percent: 100.0,
                ram_percent: 0.0,
            }),
        ];
        for ts in [0i64, 12_345, 86_399, 604_800, 1_700_000_000] {
            let f = GlobalFeatures::build(&slots, ts);
            assert_eq!(f.values.len(), GlobalFeatures::dim(3));
            let day_sum: f64 = f.values[9..16].iter().sum();
            let part_sum: f64 = f.values[16..20].iter().sum();
            assert_eq!(day_sum, 1.0);
            assert_eq!(part_sum, 1.0);
        }
    }

    #[test]
    fn inactive_slots_are_zero() {
        let slots = vec![None, Some(NodeSlot { cpu_percent: 80.0, ram_percent: 40.0 })];
        let f = GlobalFeatures::build(&slots, 0);
        assert_eq!(&f.values[0..3], &[0.0, 0.0, 0.0]);
        assert_eq!(&f.values[3..6], &[1.0, 0.8, 0.4]);
    }
}
