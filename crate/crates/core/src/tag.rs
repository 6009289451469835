//! Detection events.

use std::cmp::Ordering;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TrialKind {
    Conditional = 0,
    Unconditional = 1,
}

impl TrialKind {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(TrialKind::Conditional),
            1 => Some(TrialKind::Unconditional),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    Stokes = 0,
    AntiStokes = 1,
}

impl Channel {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Channel::Stokes),
            1 => Some(Channel::AntiStokes),
            _ => None,
        }
    }
}

/// One detection. `time_ns` is measured from the write pulse for Stokes
/// tags and from the read pulse for anti-Stokes tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TimeTag {
    pub trial_id: u64,
    pub kind: TrialKind,
    pub channel: Channel,
    pub time_ns: u64,
}

impl TimeTag {
    /// Stream order key: (trial_id, channel, time).
    pub fn order_key(&self) -> (u64, Channel, u64) {
        (self.trial_id, self.channel, self.time_ns)
    }
}

impl PartialOrd for TimeTag {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TimeTag {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order_key()
            .cmp(&other.order_key())
            .then(self.kind.cmp(&other.kind))
    }
}

/// Checks the stream contract; returns the index of the first tag that is
/// out of order or whose kind disagrees with earlier tags of its trial.
pub fn first_disorder(tags: &[TimeTag]) -> Option<usize> {
    tags.windows(2).position(|w| {
        w[0].order_key() > w[1].order_key()
            || (w[0].trial_id == w[1].trial_id && w[0].kind != w[1].kind)
    })
    .map(|i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tag(trial_id: u64, channel: Channel, time_ns: u64) -> TimeTag {
        TimeTag { trial_id, kind: TrialKind::Conditional, channel, time_ns }
    }

    #[test]
    fn ordering_contract() {
        let ok = [tag(0, Channel::Stokes, 5), tag(0, Channel::AntiStokes, 1), tag(3, Channel::Stokes, 0)];
        assert_eq!(first_disorder(&ok), None);
        let bad = [tag(0, Channel::AntiStokes, 1), tag(0, Channel::Stokes, 5)];
        assert_eq!(first_disorder(&bad), Some(1));
    }
}
