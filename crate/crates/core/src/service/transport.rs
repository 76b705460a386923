//! Simulator transport that carries every message through the service API,
//! in process or over a socket per node.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::federation::{decode, encode, Message, NodeId, Outgoing, SharedNode, Transport};
use crate::valuation::ValuationParams;

use super::{serve_service, KbApi, LocalClient, RemoteClient, Service, ServiceHandle};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wire {
    InProcess,
    Socket,
}

struct Peer {
    client: Box<dyn KbApi>,
    _server: Option<ServiceHandle>,
}

/// Wraps each simulated node in a [`Service`] on first delivery and relays
/// messages to it with the `relay` operation.
pub struct ServiceTransport {
    wire: Wire,
    params: ValuationParams,
    peers: BTreeMap<NodeId, Peer>,
}

impl ServiceTransport {
    pub fn new(wire: Wire) -> Self {
        ServiceTransport {
            wire,
            params: ValuationParams::default(),
            peers: BTreeMap::new(),
        }
    }

    fn peer(&mut self, node: &SharedNode) -> Result<&mut Peer, String> {
        let service = Service::shared(node.clone(), self.params.clone());
        let id = service.id().clone();
        if !self.peers.contains_key(&id) {
            let service = Arc::new(service);
            let peer = match self.wire {
                Wire::InProcess => Peer {
                    client: Box::new(LocalClient::shared(service)),
                    _server: None,
                },
                Wire::Socket => {
                    let server = serve_service(service, "127.0.0.1:0").map_err(|e| e.to_string())?;
                    let client = RemoteClient::connect(&server.addr().to_string()).map_err(|e| e.to_string())?;
                    Peer {
                        client: Box::new(client),
                        _server: Some(server),
                    }
                }
            };
            self.peers.insert(id.clone(), peer);
        }
        Ok(self.peers.get_mut(&id).expect("inserted"))
    }
}

impl Transport for ServiceTransport {
    fn deliver(&mut self, node: &SharedNode, from: &NodeId, msg: Message) -> Result<Vec<Outgoing>, String> {
        let peer = self.peer(node)?;
        let sent = peer.client.relay(from, &encode(&msg)).map_err(|e| e.to_string())?;
        sent.into_iter()
            .map(|e| {
                Ok(Outgoing {
                    to: e.to,
                    msg: decode(&e.record).map_err(|err| err.to_string())?,
                })
            })
            .collect()
    }
}
