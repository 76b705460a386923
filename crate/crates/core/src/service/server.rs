use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use super::{ApiError, Reply, Request, Service, ServiceConfig, ServiceError};

/// A running service. Dropping it stops accepting connections.
pub struct ServiceHandle {
    addr: SocketAddr,
    service: Arc<Service>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ServiceHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn service(&self) -> &Arc<Service> {
        &self.service
    }

    /// Blocks until the accept loop ends.
    pub fn wait(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop_now();
    }

    fn stop_now(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the accept loop
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServiceHandle {
    fn drop(&mut self) {
        if self.thread.is_some() {
            self.stop_now();
        }
    }
}

/// Opens the KB described by `config` and starts listening.
pub fn serve(config: &ServiceConfig) -> Result<ServiceHandle, ServiceError> {
    let service = Arc::new(Service::open(config)?);
    Ok(serve_service(service, &config.listen)?)
}

pub fn serve_service(service: Arc<Service>, listen: &str) -> std::io::Result<ServiceHandle> {
    let listener = TcpListener::bind(listen)?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let thread = {
        let (service, stop) = (service.clone(), stop.clone());
        std::thread::spawn(move || {
            for conn in listener.incoming() {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(conn) = conn else { continue };
                let service = service.clone();
                std::thread::spawn(move || connection(&service, conn));
            }
        })
    };
    Ok(ServiceHandle {
        addr,
        service,
        stop,
        thread: Some(thread),
    })
}

fn connection(service: &Service, conn: TcpStream) {
    let Ok(mut out) = conn.try_clone() else { return };
    for line in BufReader::new(conn).lines() {
        let Ok(line) = line else { return };
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<Request>(&line) {
            Ok(req) => match service.handle(req) {
                Ok(r) => Reply::Ok(r),
                Err(e) => Reply::Error(e),
            },
            Err(e) => Reply::Error(ApiError::invalid(format!("bad request: {e}"))),
        };
        let mut text = serde_json::to_string(&reply).expect("replies serialize");
        text.push('\n');
        if out.write_all(text.as_bytes()).and_then(|_| out.flush()).is_err() {
            return;
        }
    }
}
