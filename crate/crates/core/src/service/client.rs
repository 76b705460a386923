use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::sync::Arc;
use std::time::Duration;

use super::{ApiError, KbApi, Reply, Request, Response, Service};

/// Calls the service in process.
#[derive(Clone)]
pub struct LocalClient {
    service: Arc<Service>,
}

impl LocalClient {
    pub fn new(service: Service) -> Self {
        LocalClient {
            service: Arc::new(service),
        }
    }

    pub fn shared(service: Arc<Service>) -> Self {
        LocalClient { service }
    }

    pub fn service(&self) -> &Arc<Service> {
        &self.service
    }
}

impl KbApi for LocalClient {
    fn call(&mut self, req: Request) -> Result<Response, ApiError> {
        self.service.handle(req)
    }
}

/// One connection to a running service.
pub struct RemoteClient {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl RemoteClient {
    pub fn connect(addr: &str) -> Result<Self, ApiError> {
        let s = TcpStream::connect(addr).map_err(|e| ApiError::transport(format!("{addr}: {e}")))?;
        s.set_read_timeout(Some(Duration::from_secs(60))).map_err(ApiError::transport)?;
        let writer = s.try_clone().map_err(ApiError::transport)?;
        Ok(RemoteClient {
            reader: BufReader::new(s),
            writer,
        })
    }
}

impl KbApi for RemoteClient {
    fn call(&mut self, req: Request) -> Result<Response, ApiError> {
        let mut line = serde_json::to_string(&req).map_err(ApiError::transport)?;
        line.push('\n');
        self.writer
            .write_all(line.as_bytes())
            .and_then(|_| self.writer.flush())
            .map_err(ApiError::transport)?;
        let mut answer = String::new();
        let n = self.reader.read_line(&mut answer).map_err(ApiError::transport)?;
        if n == 0 {
            return Err(ApiError::transport("connection closed"));
        }
        match serde_json::from_str::<Reply>(&answer).map_err(ApiError::transport)? {
            Reply::Ok(r) => Ok(r),
            Reply::Error(e) => Err(e),
        }
    }
}
