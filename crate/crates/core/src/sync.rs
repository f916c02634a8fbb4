//! Diffsync endpoints.
//!
//! One cycle, started by a client:
//!
//! 1. the user edits the client item ([`ClientEndpoint::apply_local_edit`]);
//! 2. [`ClientEndpoint::begin_cycle`] diffs shadow against item, copies the
//!    item into the shadow and ships the edits;
//! 3. [`ServerEndpoint::process`] patches them exactly onto that client's
//!    server shadow and fuzzily onto the server item, diffs shadow against
//!    item, copies item into shadow and replies;
//! 4. [`ClientEndpoint::apply_reply`] patches the reply exactly onto the
//!    client shadow and fuzzily onto the client item.
//!
//! Transport is assumed reliable and ordered for edit packets.

use alloc::collections::BTreeMap;
use alloc::string::String;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::diff::{self, wire, Content, DiffError, EditScript, PatchMode};
use crate::scheduler::NotifyThrottle;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClientId(String);

impl ClientId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ClientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    ToServer,
    ToClient,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::ToServer => "to_server",
            Direction::ToClient => "to_client",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditPacket {
    pub client_id: ClientId,
    pub direction: Direction,
    pub script: EditScript,
    pub wire_bytes: usize,
}

impl EditPacket {
    pub fn new(client_id: ClientId, direction: Direction, script: EditScript) -> Self {
        let wire_bytes = wire::wire_bytes(&script);
        Self {
            client_id,
            direction,
            script,
            wire_bytes,
        }
    }

    /// Canonical JSON: `{"client_id":..,"direction":..,"ops":[..]}`.
    pub fn encode(&self) -> String {
        let mut out = String::from("{\"client_id\":");
        wire::write_str(&mut out, self.client_id.as_str());
        out.push_str(",\"direction\":\"");
        out.push_str(self.direction.as_str());
        out.push_str("\",\"ops\":[");
        out.push_str(&wire::script_payload(&self.script));
        out.push_str("]}");
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SyncError {
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("client {0} already has a cycle in flight")]
    CycleActive(ClientId),
    #[error("client {0} has no cycle in flight")]
    NoActiveCycle(ClientId),
    #[error("unknown client {0}")]
    UnknownClient(ClientId),
    #[error("client {0} is already registered")]
    DuplicateClient(ClientId),
    #[error("packet for {0} travels the wrong way")]
    WrongDirection(ClientId),
}

impl SyncError {
    pub fn is_divergence(&self) -> bool {
        matches!(self, SyncError::Diff(DiffError::ShadowDivergence { .. }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CycleOutcome {
    pub changed_item: bool,
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientEndpoint {
    pub id: ClientId,
    pub item: Content,
    pub shadow: Content,
    pub cycle_active: bool,
    pub loop_once_more: bool,
}

impl ClientEndpoint {
    pub fn new(id: ClientId, initial: Content) -> Self {
        Self {
            id,
            shadow: initial.clone(),
            item: initial,
            cycle_active: false,
            loop_once_more: false,
        }
    }

    /// Applies a user edit to the item; the shadow is untouched.
    pub fn apply_local_edit(&mut self, edit: &EditScript) -> Result<(), SyncError> {
        self.item = diff::patch(&self.item, edit, PatchMode::Exact)?.content;
        Ok(())
    }

    pub fn begin_cycle(&mut self) -> Result<EditPacket, SyncError> {
        if self.cycle_active {
            return Err(SyncError::CycleActive(self.id.clone()));
        }
        let script = diff::diff(&self.shadow, &self.item)?;
        self.shadow = self.item.clone();
        self.cycle_active = true;
        Ok(EditPacket::new(self.id.clone(), Direction::ToServer, script))
    }

    pub fn apply_reply(&mut self, reply: &EditPacket) -> Result<CycleOutcome, SyncError> {
        if !self.cycle_active {
            return Err(SyncError::NoActiveCycle(self.id.clone()));
        }
        if reply.direction != Direction::ToClient || reply.client_id != self.id {
            return Err(SyncError::WrongDirection(reply.client_id.clone()));
        }
        self.cycle_active = false;
        if reply.script.is_empty() {
            return Ok(CycleOutcome::default());
        }
        self.shadow = diff::patch(&self.shadow, &reply.script, PatchMode::Exact)?.content;
        let out = diff::patch(&self.item, &reply.script, PatchMode::Fuzzy)?;
        let changed_item = out.content != self.item;
        self.item = out.content;
        Ok(CycleOutcome {
            changed_item,
            dropped: out.dropped,
        })
    }
}

/// Result of one server-side half cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerReply {
    pub packet: EditPacket,
    pub item_changed: bool,
    /// Client ops that could not be placed on the server item.
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerEndpoint {
    pub item: Content,
    pub shadows: BTreeMap<ClientId, Content>,
    pub notify: NotifyThrottle,
}

impl ServerEndpoint {
    pub fn new(item: Content, notify: NotifyThrottle) -> Self {
        Self {
            item,
            shadows: BTreeMap::new(),
            notify,
        }
    }

    /// Registers a client; it starts from the current server item.
    pub fn register(&mut self, id: ClientId) -> Result<ClientEndpoint, SyncError> {
        if self.shadows.contains_key(&id) {
            return Err(SyncError::DuplicateClient(id));
        }
        self.shadows.insert(id.clone(), self.item.clone());
        Ok(ClientEndpoint::new(id, self.item.clone()))
    }

    /// Applies an edit made directly on the server (another user); shadows untouched.
    pub fn apply_local_edit(&mut self, edit: &EditScript) -> Result<(), SyncError> {
        self.item = diff::patch(&self.item, edit, PatchMode::Exact)?.content;
        Ok(())
    }

    pub fn process(&mut self, packet: &EditPacket) -> Result<ServerReply, SyncError> {
        if packet.direction != Direction::ToServer {
            return Err(SyncError::WrongDirection(packet.client_id.clone()));
        }
        let shadow = self
            .shadows
            .get_mut(&packet.client_id)
            .ok_or_else(|| SyncError::UnknownClient(packet.client_id.clone()))?;
        let mut item_changed = false;
        let mut dropped = 0;
        if !packet.script.is_empty() {
            *shadow = diff::patch(shadow, &packet.script, PatchMode::Exact)?.content;
            let out = diff::patch(&self.item, &packet.script, PatchMode::Fuzzy)?;
            item_changed = out.content != self.item;
            dropped = out.dropped;
            self.item = out.content;
        }
        let reply = diff::diff(shadow, &self.item)?;
        if !reply.is_empty() {
            *shadow = self.item.clone();
        }
        Ok(ServerReply {
            packet: EditPacket::new(packet.client_id.clone(), Direction::ToClient, reply),
            item_changed,
            dropped,
        })
    }

    /// Clients whose shadow lags the server item.
    pub fn stale_clients(&self) -> impl Iterator<Item = &ClientId> {
        self.shadows
            .iter()
            .filter(|(_, s)| **s != self.item)
            .map(|(id, _)| id)
    }

    pub fn client_ids(&self) -> impl Iterator<Item = &ClientId> {
        self.shadows.keys()
    }

    pub fn is_registered(&self, id: &ClientId) -> bool {
        self.shadows.contains_key(id)
    }

    pub fn shadow(&self, id: &ClientId) -> Option<&Content> {
        self.shadows.get(id)
    }
}

impl fmt::Display for EditPacket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} ({} ops, {} bytes)",
            self.client_id,
            self.direction.as_str(),
            self.script.len(),
            self.wire_bytes
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheduler::NotifyThrottle;
    use crate::SimTime;

    fn setup(text: &str, n: usize) -> (ServerEndpoint, alloc::vec::Vec<ClientEndpoint>) {
        let mut server = ServerEndpoint::new(Content::text(text), NotifyThrottle::new(SimTime::from_secs(2)));
        let clients = (0..n)
            .map(|i| server.register(ClientId::new(alloc::format!("c{i}"))).unwrap())
            .collect();
        (server, clients)
    }

    fn edit(from: &str, to: &str) -> EditScript {
        diff::diff(&Content::text(from), &Content::text(to)).unwrap()
    }

    fn cycle(c: &mut ClientEndpoint, s: &mut ServerEndpoint) -> CycleOutcome {
        let p = c.begin_cycle().unwrap();
        let r = s.process(&p).unwrap();
        c.apply_reply(&r.packet).unwrap()
    }

    #[test]
    fn local_edit_leaves_shadow() {
        let (_, mut cs) = setup("AB", 1);
        cs[0].apply_local_edit(&edit("AB", "A12B")).unwrap();
        assert_eq!(cs[0].item, Content::text("A12B"));
        assert_eq!(cs[0].shadow, Content::text("AB"));
        cs[0].apply_local_edit(&EditScript::empty()).unwrap();
        assert_eq!(cs[0].item, Content::text("A12B"));
    }

    #[test]
    fn server_edit_leaves_shadows() {
        let (mut s, _) = setup("AB", 2);
        s.apply_local_edit(&edit("AB", "ABC")).unwrap();
        assert_eq!(s.item, Content::text("ABC"));
        assert!(s.shadows.values().all(|v| *v == Content::text("AB")));
    }

    #[test]
    fn empty_cycle_is_two_header_packets() {
        let (mut s, mut cs) = setup("AB", 1);
        let p = cs[0].begin_cycle().unwrap();
        assert_eq!(p.wire_bytes, 100);
        let r = s.process(&p).unwrap();
        assert_eq!(r.packet.wire_bytes, 100);
        assert_eq!(cs[0].apply_reply(&r.packet).unwrap(), CycleOutcome::default());
        assert!(!cs[0].cycle_active);
    }

    #[test]
    fn second_begin_is_refused() {
        let (_, mut cs) = setup("AB", 1);
        cs[0].begin_cycle().unwrap();
        assert!(matches!(cs[0].begin_cycle(), Err(SyncError::CycleActive(_))));
    }

    #[test]
    fn single_client_edit_reaches_server() {
        let (mut s, mut cs) = setup("AB", 1);
        cs[0].apply_local_edit(&edit("AB", "A12B")).unwrap();
        let p = cs[0].begin_cycle().unwrap();
        let r = s.process(&p).unwrap();
        assert_eq!(s.item, Content::text("A12B"));
        assert!(r.packet.script.is_empty());
        assert!(r.item_changed);
        cs[0].apply_reply(&r.packet).unwrap();
        assert_eq!(cs[0].item, s.item);
    }

    #[test]
    fn reply_carries_other_users_change() {
        let (mut s, mut cs) = setup("AB", 1);
        s.apply_local_edit(&edit("AB", "ABZ")).unwrap();
        let out = cycle(&mut cs[0], &mut s);
        assert!(out.changed_item);
        assert_eq!(cs[0].item, Content::text("ABZ"));
        assert_eq!(cs[0].shadow, cs[0].item);
        assert_eq!(s.shadow(&cs[0].id), Some(&s.item));
    }

    #[test]
    fn intent_case_converges() {
        let (mut s, mut cs) = setup("AB", 2);
        cs[0].apply_local_edit(&edit("AB", "A")).unwrap();
        cs[1].apply_local_edit(&edit("AB", "A12B")).unwrap();
        cycle(&mut cs[0], &mut s);
        cycle(&mut cs[1], &mut s);
        cycle(&mut cs[0], &mut s);
        assert_eq!(cs[0].item, s.item);
        assert_eq!(cs[1].item, s.item);
        assert!(s.stale_clients().next().is_none());
    }

    #[test]
    fn reply_after_fresh_local_edit_reconciles() {
        let (mut s, mut cs) = setup("hello world", 1);
        s.apply_local_edit(&edit("hello world", "hello brave world")).unwrap();
        let p = cs[0].begin_cycle().unwrap();
        let r = s.process(&p).unwrap();
        // the user keeps typing while the reply is in flight
        cs[0].apply_local_edit(&edit("hello world", "hello world!")).unwrap();
        let out = cs[0].apply_reply(&r.packet).unwrap();
        assert_eq!(out.dropped, 0);
        assert_eq!(cs[0].shadow, Content::text("hello brave world"));
        assert_eq!(cs[0].item, Content::text("hello brave world!"));
        cycle(&mut cs[0], &mut s);
        assert_eq!(s.item, Content::text("hello brave world!"));
        assert_eq!(cs[0].item, s.item);
        assert_eq!(cs[0].shadow, s.item);
    }

    #[test]
    fn unknown_client_is_rejected() {
        let (mut s, _) = setup("AB", 0);
        let p = EditPacket::new(ClientId::new("ghost"), Direction::ToServer, EditScript::empty());
        assert!(matches!(s.process(&p), Err(SyncError::UnknownClient(_))));
    }

    #[test]
    fn packet_encoding() {
        let p = EditPacket::new(ClientId::new("c0"), Direction::ToServer, edit("cat", "ca"));
        assert_eq!(p.encode(), r#"{"client_id":"c0","direction":"to_server","ops":[["r",2],["d",1,"ca",""]]}"#);
        assert_eq!(p.wire_bytes, 100 + r#"["r",2],["d",1,"ca",""]"#.len());
    }
}
