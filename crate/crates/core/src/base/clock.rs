use crate::error::{Result, SimError};

/// Logical one-second clock for a bounded run. Ticks never sleep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimClock {
    now: u32,
    horizon: u32,
}

impl SimClock {
    pub fn new(horizon: u32) -> Result<Self> {
        if horizon == 0 {
            return Err(SimError::invalid("clock horizon must be positive"));
        }
        Ok(SimClock { now: 0, horizon })
    }

    pub fn now(&self) -> u32 {
        self.now
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    /// Advances one second. Returns `false` once the horizon is reached.
    pub fn tick(&mut self) -> bool {
        if self.now < self.horizon {
            self.now += 1;
        }
        self.now < self.horizon
    }

    /// Every second in `[0, horizon)`, in order.
    pub fn seconds(&self) -> impl Iterator<Item = u32> {
        0..self.horizon
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_up_to_horizon() {
        let mut clock = SimClock::new(3).unwrap();
        let mut seen = vec![clock.now()];
        while clock.tick() {
            seen.push(clock.now());
        }
        assert_eq!(seen, vec![0, 1, 2]);
        assert_eq!(clock.now(), 3);
        assert!(!clock.tick());
        assert_eq!(clock.now(), 3);
    }

    #[test]
    fn zero_horizon_rejected() {
        assert!(SimClock::new(0).is_err());
    }
}
