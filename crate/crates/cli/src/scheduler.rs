//! Run scheduler: a fixed pool of worker threads taking runs in FIFO order.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;

use crate::store::{RunRecord, RunStatus, Store, StoreError};

struct Shared {
    store: Arc<Store>,
    queue: Mutex<VecDeque<String>>,
    ready: Condvar,
    cancels: Mutex<HashMap<String, Arc<AtomicBool>>>,
    shutdown: AtomicBool,
}

pub struct Scheduler {
    shared: Arc<Shared>,
    workers: Mutex<Vec<JoinHandle<()>>>,
}

#[derive(Debug, PartialEq, Eq)]
pub enum CancelOutcome {
    Requested,
    AlreadyFinished(RunStatus),
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl Scheduler {
    pub fn new(store: Arc<Store>, workers: usize) -> Scheduler {
        let s = Scheduler::paused(store);
        s.resume(workers);
        s
    }

    /// A scheduler that queues runs but starts none until [`resume`](Self::resume).
    pub fn paused(store: Arc<Store>) -> Scheduler {
        let shared = Arc::new(Shared {
            store,
            queue: Mutex::new(VecDeque::new()),
            ready: Condvar::new(),
            cancels: Mutex::new(HashMap::new()),
            shutdown: AtomicBool::new(false),
        });
        Scheduler { shared, workers: Mutex::new(Vec::new()) }
    }

    /// Start `workers` more worker threads (at least one).
    pub fn resume(&self, workers: usize) {
        let mut pool = self.workers.lock().unwrap();
        for _ in 0..workers.max(1) {
            let s = Arc::clone(&self.shared);
            pool.push(std::thread::spawn(move || worker(&s)));
        }
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.shared.store
    }

    pub fn submit(&self, id: &str) {
        self.shared.cancels.lock().unwrap().insert(id.to_string(), Arc::new(AtomicBool::new(false)));
        self.shared.queue.lock().unwrap().push_back(id.to_string());
        self.shared.ready.notify_one();
    }

    /// Ask a queued or running run to stop. A queued run still passes
    /// through Running so its status history stays linear.
    pub fn cancel(&self, id: &str) -> Result<CancelOutcome, StoreError> {
        let rec = self.shared.store.load(id)?;
        if rec.status.is_terminal() {
            return Ok(CancelOutcome::AlreadyFinished(rec.status));
        }
        match self.shared.cancels.lock().unwrap().get(id) {
            Some(flag) => flag.store(true, Ordering::SeqCst),
            None => return Ok(CancelOutcome::AlreadyFinished(rec.status)),
        }
        Ok(CancelOutcome::Requested)
    }

    /// Block until the run reaches a terminal status.
    pub fn wait(&self, id: &str) -> Result<RunRecord, StoreError> {
        loop {
            let rec = self.shared.store.load(id)?;
            if rec.status.is_terminal() {
                return Ok(rec);
            }
            std::thread::sleep(std::time::Duration::from_millis(5));
        }
    }
}

impl Drop for Scheduler {
    fn drop(&mut self) {
        self.shared.shutdown.store(true, Ordering::SeqCst);
        for flag in self.shared.cancels.lock().unwrap().values() {
            flag.store(true, Ordering::SeqCst);
        }
        self.shared.ready.notify_all();
        for w in self.workers.get_mut().unwrap().drain(..) {
            let _ = w.join();
        }
    }
}

fn worker(s: &Shared) {
    loop {
        let id = {
            let mut q = s.queue.lock().unwrap();
            loop {
                if s.shutdown.load(Ordering::SeqCst) {
                    return;
                }
                if let Some(id) = q.pop_front() {
                    break id;
                }
                q = s.ready.wait(q).unwrap();
            }
        };
        let flag = s.cancels.lock().unwrap().get(&id).cloned().unwrap_or_default();
        if let Err(e) = s.store.execute(&id, &flag) {
            eprintln!("run {id}: {e}");
        }
        s.cancels.lock().unwrap().remove(&id);
    }
}
