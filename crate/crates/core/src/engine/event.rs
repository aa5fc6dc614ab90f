use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::units::SimTime;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("event scheduled at {at} but the clock is already at {now}")]
pub struct ScheduleError {
    pub at: SimTime,
    pub now: SimTime,
}

struct Entry<E> {
    time: SimTime,
    seq: u64,
    payload: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // BinaryHeap is a max-heap; invert so the earliest (time, seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

/// Virtual clock plus a priority queue of pending events.
///
/// Events are dispatched in `(time, sequence_number)` order, where the
/// sequence number is the global insertion counter, so two events scheduled
/// for the same instant run in the order they were scheduled.
pub struct EventQueue<E> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Entry<E>>,
    dispatched: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        EventQueue { now: SimTime::ZERO, next_seq: 0, heap: BinaryHeap::new(), dispatched: 0 }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Total number of events popped so far.
    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    /// Queues `payload` at `at` and returns its sequence number.
    pub fn try_schedule(&mut self, at: SimTime, payload: E) -> Result<u64, ScheduleError> {
        if at < self.now {
            return Err(ScheduleError { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry { time: at, seq, payload });
        Ok(seq)
    }

    /// Like [`try_schedule`](Self::try_schedule), but scheduling in the past
    /// is a logic error in the caller and aborts the run.
    pub fn schedule(&mut self, at: SimTime, payload: E) -> u64 {
        match self.try_schedule(at, payload) {
            Ok(seq) => seq,
            Err(e) => panic!("simulation invariant violated: {e}"),
        }
    }

    pub fn schedule_in(&mut self, delay: SimTime, payload: E) -> u64 {
        self.schedule(self.now + delay, payload)
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|e| e.time)
    }

    /// Pops the next event if it is due at or before `limit`, advancing the
    /// clock to its timestamp.
    pub fn pop_until(&mut self, limit: SimTime) -> Option<(SimTime, u64, E)> {
        if self.heap.peek()?.time > limit {
            return None;
        }
        let e = self.heap.pop()?;
        debug_assert!(e.time >= self.now);
        self.now = e.time;
        self.dispatched += 1;
        Some((e.time, e.seq, e.payload))
    }

    /// Dispatches every event with time `<= until` through `handler`, then
    /// leaves the clock at `until`. Handlers may schedule further events;
    /// those that fall inside the horizon are dispatched too.
    pub fn run_until<F>(&mut self, until: SimTime, mut handler: F)
    where
        F: FnMut(&mut Self, E),
    {
        assert!(until >= self.now, "run_until({until}) is behind the clock at {}", self.now);
        while let Some((_, _, payload)) = self.pop_until(until) {
            handler(self, payload);
        }
        self.now = until;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_times_dispatch_in_insertion_order() {
        let mut q = EventQueue::new();
        q.schedule(SimTime(5), "first");
        q.schedule(SimTime(5), "second");
        q.schedule(SimTime(1), "early");
        let mut seen = Vec::new();
        q.run_until(SimTime(10), |_, e| seen.push(e));
        assert_eq!(seen, ["early", "first", "second"]);
    }

    #[test]
    fn event_at_current_clock_is_dispatched_first() {
        let mut q = EventQueue::new();
        q.schedule(SimTime(3), 'b');
        q.schedule(SimTime(0), 'a');
        let mut seen = Vec::new();
        q.run_until(SimTime(3), |_, e| seen.push(e));
        assert_eq!(seen, ['a', 'b']);
    }

    #[test]
    fn scheduling_in_the_past_is_rejected() {
        let mut q: EventQueue<()> = EventQueue::new();
        q.run_until(SimTime(7), |_, _| {});
        assert_eq!(q.try_schedule(SimTime(3), ()), Err(ScheduleError { at: SimTime(3), now: SimTime(7) }));
    }

    #[test]
    #[should_panic(expected = "simulation invariant violated")]
    fn schedule_in_the_past_halts() {
        let mut q: EventQueue<()> = EventQueue::new();
        q.run_until(SimTime(7), |_, _| {});
        q.schedule(SimTime(3), ());
    }

    #[test]
    fn empty_run_advances_clock() {
        let mut q: EventQueue<()> = EventQueue::new();
        let mut n = 0;
        q.run_until(SimTime(1_000_000_000), |_, _| n += 1);
        assert_eq!(n, 0);
        assert_eq!(q.now(), SimTime(1_000_000_000));
    }

    #[test]
    fn horizon_is_inclusive() {
        let mut q = EventQueue::new();
        q.schedule(SimTime(5), ());
        q.schedule(SimTime(6), ());
        let mut n = 0;
        q.run_until(SimTime(5), |_, _| n += 1);
        assert_eq!(n, 1);
        assert_eq!(q.len(), 1);
    }

    #[test]
    fn handlers_can_chain_events() {
        let mut q = EventQueue::new();
        q.schedule(SimTime(0), 0u32);
        let mut times = Vec::new();
        q.run_until(SimTime(100), |q, k| {
            times.push(q.now().0);
            if k < 3 {
                q.schedule_in(SimTime(10), k + 1);
            }
        });
        assert_eq!(times, [0, 10, 20, 30]);
    }
}
