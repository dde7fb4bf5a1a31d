//! Worker pool with a priority-ordered ready queue and a timer thread for
//! delayed jobs.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::sync::{Arc, Condvar, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Instant;

use super::{ExecId, TaskControl};

/// Scheduling rank; the greatest rank runs first. EVAL jobs precede PRINT
/// jobs, then higher priority, then lower tiebreak.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Rank {
    pub eval: bool,
    pub priority: i64,
    pub tiebreak: u64,
}

impl Ord for Rank {
    fn cmp(&self, other: &Self) -> Ordering {
        self.eval
            .cmp(&other.eval)
            .then(self.priority.cmp(&other.priority))
            .then(other.tiebreak.cmp(&self.tiebreak))
    }
}

impl PartialOrd for Rank {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub(crate) struct Job {
    pub exec_id: ExecId,
    pub rank: Rank,
    pub control: Arc<TaskControl>,
    pub run: Box<dyn FnOnce(&TaskControl) + Send>,
}

struct Ready(Job);

impl PartialEq for Ready {
    fn eq(&self, other: &Self) -> bool {
        self.0.rank == other.0.rank && self.0.exec_id == other.0.exec_id
    }
}
impl Eq for Ready {}
impl PartialOrd for Ready {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ready {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.rank.cmp(&other.0.rank).then(other.0.exec_id.cmp(&self.0.exec_id))
    }
}

struct Delayed {
    at: Instant,
    seq: u64,
    job: Job,
}

impl PartialEq for Delayed {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}
impl Eq for Delayed {}
impl PartialOrd for Delayed {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Delayed {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

#[derive(Default)]
struct State {
    ready: BinaryHeap<Ready>,
    delayed: BinaryHeap<Reverse<Delayed>>,
    seq: u64,
    shutdown: bool,
}

#[derive(Default)]
struct Shared {
    state: Mutex<State>,
    work: Condvar,
    timer: Condvar,
}

pub(crate) struct Pool {
    shared: Arc<Shared>,
    threads: Vec<JoinHandle<()>>,
}

impl Pool {
    pub fn new(workers: usize) -> Self {
        let shared = Arc::new(Shared::default());
        let mut threads = Vec::new();
        for i in 0..workers.max(1) {
            let shared = shared.clone();
            let t = thread::Builder::new()
                .name(format!("pide-worker-{i}"))
                .spawn(move || worker(&shared))
                .expect("spawn worker");
            threads.push(t);
        }
        let s = shared.clone();
        threads.push(thread::Builder::new().name("pide-timer".into()).spawn(move || timer(&s)).expect("spawn timer"));
        Pool { shared, threads }
    }

    /// Queues a job; it becomes ready at `not_before`.
    pub fn submit(&self, job: Job, not_before: Option<Instant>) {
        let mut st = self.shared.state.lock().expect("pool lock");
        match not_before {
            Some(at) if at > Instant::now() => {
                st.seq += 1;
                let seq = st.seq;
                st.delayed.push(Reverse(Delayed { at, seq, job }));
                self.shared.timer.notify_one();
            }
            _ => {
                st.ready.push(Ready(job));
                self.shared.work.notify_one();
            }
        }
    }
}

impl Drop for Pool {
    fn drop(&mut self) {
        self.shared.state.lock().expect("pool lock").shutdown = true;
        self.shared.work.notify_all();
        self.shared.timer.notify_all();
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

fn worker(shared: &Shared) {
    loop {
        let job = {
            let mut st = shared.state.lock().expect("pool lock");
            loop {
                if st.shutdown {
                    return;
                }
                if let Some(Ready(job)) = st.ready.pop() {
                    break job;
                }
                st = shared.work.wait(st).expect("pool lock");
            }
        };
        if job.control.try_start() {
            (job.run)(&job.control);
        }
    }
}

fn timer(shared: &Shared) {
    let mut st = shared.state.lock().expect("pool lock");
    loop {
        if st.shutdown {
            return;
        }
        let now = Instant::now();
        let mut moved = 0;
        while st.delayed.peek().is_some_and(|Reverse(d)| d.at <= now) {
            let Reverse(d) = st.delayed.pop().expect("peeked");
            st.ready.push(Ready(d.job));
            moved += 1;
        }
        for _ in 0..moved {
            shared.work.notify_one();
        }
        st = match st.delayed.peek() {
            Some(Reverse(d)) => {
                let wait = d.at.saturating_duration_since(now);
                shared.timer.wait_timeout(st, wait).expect("pool lock").0
            }
            None => shared.timer.wait(st).expect("pool lock"),
        };
    }
}
