//! The broker service: a key -> tensor map behind a TCP listener.

use std::collections::HashMap;
use std::io::{BufReader, BufWriter};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use super::wire::{Frame, Tensor, WireError};

/// Shared store with blocking reads.
#[derive(Debug)]
pub struct Store {
    inner: Mutex<StoreInner>,
    changed: Condvar,
    capacity: usize,
}

#[derive(Debug, Default)]
struct StoreInner {
    map: HashMap<String, Arc<Tensor>>,
    used: usize,
}

fn entry_size(key: &str, t: &Tensor) -> usize {
    key.len() + t.encoded_len()
}

/// Why a PUT was refused.
#[derive(Debug, PartialEq, Eq)]
pub struct CapacityExceeded {
    pub needed: usize,
    pub capacity: usize,
}

impl Store {
    /// Store holding at most `capacity` bytes of keys plus tensors.
    pub fn new(capacity: usize) -> Self {
        Self {
            inner: Mutex::new(StoreInner::default()),
            changed: Condvar::new(),
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn used(&self) -> usize {
        self.inner.lock().unwrap().used
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Atomically replaces the value of `key`.
    pub fn put(&self, key: String, tensor: Tensor) -> Result<(), CapacityExceeded> {
        let size = entry_size(&key, &tensor);
        let mut g = self.inner.lock().unwrap();
        let old = g.map.get(&key).map_or(0, |t| entry_size(&key, t));
        let needed = g.used - old + size;
        if needed > self.capacity {
            return Err(CapacityExceeded {
                needed,
                capacity: self.capacity,
            });
        }
        g.used = needed;
        g.map.insert(key, Arc::new(tensor));
        drop(g);
        self.changed.notify_all();
        Ok(())
    }

    /// Value of `key`, waiting up to `timeout` for it to appear.
    pub fn get(&self, key: &str, timeout: Duration) -> Option<Arc<Tensor>> {
        let deadline = Instant::now() + timeout;
        let mut g = self.inner.lock().unwrap();
        loop {
            if let Some(t) = g.map.get(key) {
                return Some(Arc::clone(t));
            }
            let now = Instant::now();
            if now >= deadline {
                return None;
            }
            g = self.changed.wait_timeout(g, deadline - now).unwrap().0;
        }
    }

    /// Removes `key`; a key ending in `*` removes every key with that prefix.
    /// Returns the number of removed entries.
    pub fn delete(&self, key: &str) -> usize {
        let mut g = self.inner.lock().unwrap();
        let g = &mut *g;
        if let Some(prefix) = key.strip_suffix('*') {
            let doomed: Vec<String> = g
                .map
                .keys()
                .filter(|k| k.starts_with(prefix))
                .cloned()
                .collect();
            for k in &doomed {
                if let Some(t) = g.map.remove(k) {
                    g.used -= entry_size(k, &t);
                }
            }
            doomed.len()
        } else if let Some(t) = g.map.remove(key) {
            g.used -= entry_size(key, &t);
            1
        } else {
            0
        }
    }
}

/// A running broker. Dropping the handle stops it.
pub struct BrokerHandle {
    addr: SocketAddr,
    store: Arc<Store>,
    stop: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
}

impl BrokerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    /// Stops accepting connections and waits for the accept loop to exit.
    /// Open connections end when their clients disconnect.
    pub fn shutdown(&mut self) {
        if self.stop.swap(true, Ordering::SeqCst) {
            return;
        }
        // Wake the blocking accept.
        let _ = TcpStream::connect_timeout(&self.addr, Duration::from_secs(1));
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
    }

    /// Blocks until the service stops (it only stops via [`Self::shutdown`]).
    pub fn wait(mut self) {
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
    }
}

impl Drop for BrokerHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Largest tensor accepted in one frame, independent of the store capacity.
const MAX_FRAME_PAYLOAD: u64 = 1 << 31;

/// Binds `addr` and serves clients on background threads.
pub fn serve<A: ToSocketAddrs>(addr: A, capacity_bytes: usize) -> std::io::Result<BrokerHandle> {
    let listener = TcpListener::bind(addr)?;
    let addr = listener.local_addr()?;
    let store = Arc::new(Store::new(capacity_bytes));
    let stop = Arc::new(AtomicBool::new(false));
    let acceptor = {
        let store = Arc::clone(&store);
        let stop = Arc::clone(&stop);
        std::thread::Builder::new()
            .name("broker-accept".into())
            .spawn(move || accept_loop(listener, store, stop))?
    };
    log::info!("broker listening on {addr} (capacity {capacity_bytes} bytes)");
    Ok(BrokerHandle {
        addr,
        store,
        stop,
        acceptor: Some(acceptor),
    })
}

fn accept_loop(listener: TcpListener, store: Arc<Store>, stop: Arc<AtomicBool>) {
    for conn in listener.incoming() {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        match conn {
            Ok(stream) => {
                let store = Arc::clone(&store);
                let _ = std::thread::Builder::new()
                    .name("broker-conn".into())
                    .spawn(move || {
                        if let Err(e) = handle_connection(stream, &store) {
                            log::debug!("broker connection ended: {e}");
                        }
                    });
            }
            Err(e) => log::warn!("broker accept failed: {e}"),
        }
    }
}

fn handle_connection(stream: TcpStream, store: &Store) -> Result<(), WireError> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream.try_clone()?);
    let max_payload = MAX_FRAME_PAYLOAD.min(store.capacity() as u64);
    loop {
        let frame = match Frame::read_from(&mut reader, max_payload) {
            Ok(Some(f)) => f,
            Ok(None) => return Ok(()),
            Err(WireError::Io(e)) => return Err(WireError::Io(e)),
            Err(e) => {
                // Protocol violation: report and close.
                let _ = Frame::Err {
                    message: e.to_string(),
                }
                .write_to(&mut writer);
                let _ = stream.shutdown(Shutdown::Both);
                return Err(e);
            }
        };
        let reply = match frame {
            Frame::Put { key, tensor } => match store.put(key, tensor) {
                Ok(()) => Frame::Ok,
                Err(c) => Frame::Err {
                    message: format!(
                        "capacity exceeded: {} bytes needed, {} available",
                        c.needed, c.capacity
                    ),
                },
            },
            Frame::Get { key, timeout_ms } => {
                match store.get(&key, Duration::from_millis(timeout_ms as u64)) {
                    Some(t) => Frame::Tensor {
                        key,
                        tensor: (*t).clone(),
                    },
                    None => Frame::NotFound { key },
                }
            }
            Frame::Del { key } => {
                store.delete(&key);
                Frame::Ok
            }
            Frame::Ping => Frame::Ok,
            other => {
                let _ = Frame::Err {
                    message: format!("unexpected {:?} frame from a client", other.opcode()),
                }
                .write_to(&mut writer);
                let _ = stream.shutdown(Shutdown::Both);
                return Ok(());
            }
        };
        reply.write_to(&mut writer)?;
    }
}
