//! Tick-driven publish/subscribe software bus.
//!
//! A [`SoftwareBus`] is a single-threaded, deterministic stand-in for a
//! flight-software message bus. Each topic keeps its own sequence counter,
//! subscriber list, and an ordered chain of [`Interceptor`]s. Interceptors
//! see every packet before delivery and may rewrite its payload or drop it;
//! this is how in-transit tampering is staged.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::ingest::Frame;
use crate::rng::Fnv1a;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BusError {
    #[error("component `{component}` already subscribed to `{topic}`")]
    DuplicateSubscription { topic: String, component: String },
    #[error("interceptor `{id}` already registered on `{topic}`")]
    DuplicateInterceptor { topic: String, id: String },
    #[error("unknown subscriber `{0}`")]
    UnknownSubscriber(String),
    #[error("topic name must be nonempty")]
    EmptyTopic,
    #[error("component id must be nonempty")]
    EmptyComponent,
}

/// One row of sensor telemetry.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryRecord {
    pub features: Vec<f64>,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Command {
    pub opcode: String,
    pub args: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Telemetry(TelemetryRecord),
    Frame(Frame),
    Command(Command),
}

impl Payload {
    /// Canonical byte encoding (tag byte, then little-endian fields).
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            Payload::Telemetry(t) => {
                out.push(1);
                out.extend_from_slice(&(t.features.len() as u32).to_le_bytes());
                for v in &t.features {
                    out.extend_from_slice(&v.to_bits().to_le_bytes());
                }
                out.extend_from_slice(&t.target.to_bits().to_le_bytes());
            }
            Payload::Frame(f) => {
                out.push(2);
                out.extend_from_slice(&f.width().to_le_bytes());
                out.extend_from_slice(&f.height().to_le_bytes());
                out.extend_from_slice(f.pixels());
            }
            Payload::Command(c) => {
                out.push(3);
                push_str(&mut out, &c.opcode);
                out.extend_from_slice(&(c.args.len() as u32).to_le_bytes());
                for a in &c.args {
                    push_str(&mut out, a);
                }
            }
        }
        out
    }

    /// 64-bit FNV-1a over [`Payload::canonical_bytes`].
    pub fn digest(&self) -> u64 {
        let mut h = Fnv1a::default();
        h.write(&self.canonical_bytes());
        h.finish()
    }

    pub fn as_frame(&self) -> Option<&Frame> {
        match self {
            Payload::Frame(f) => Some(f),
            _ => None,
        }
    }
}

fn push_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

/// A sealed bus message. The digest is recomputed whenever the payload
/// changes, so it always matches the payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    topic: String,
    seq: u64,
    tick: u64,
    payload: Payload,
    payload_digest: u64,
}

impl Packet {
    fn new(topic: &str, seq: u64, tick: u64, payload: Payload) -> Self {
        let payload_digest = payload.digest();
        Packet {
            topic: topic.to_owned(),
            seq,
            tick,
            payload,
            payload_digest,
        }
    }

    pub fn topic(&self) -> &str {
        &self.topic
    }

    pub fn seq(&self) -> u64 {
        self.seq
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    pub fn into_payload(self) -> Payload {
        self.payload
    }

    pub fn payload_digest(&self) -> u64 {
        self.payload_digest
    }

    /// Same header, new payload, fresh digest.
    pub fn with_payload(self, payload: Payload) -> Packet {
        Packet::new(&self.topic, self.seq, self.tick, payload)
    }
}

pub enum Verdict {
    Pass(Packet),
    Drop,
}

type Transform = Box<dyn FnMut(Packet) -> Verdict + Send>;

/// Bus middleware applied to every packet on one topic.
///
/// `topic` and `order` are assigned by [`SoftwareBus::register_interceptor`].
/// Header fields of a passed packet are restamped by the bus, so a
/// transform can only alter the payload.
pub struct Interceptor {
    id: String,
    topic: String,
    order: usize,
    transform: Transform,
}

impl Interceptor {
    pub fn new(
        id: impl Into<String>,
        transform: impl FnMut(Packet) -> Verdict + Send + 'static,
    ) -> Self {
        Interceptor {
            id: id.into(),
            topic: String::new(),
            order: 0,
            transform: Box::new(transform),
        }
    }

    /// Rewrites payloads with `f`, passing everything.
    pub fn map_payload(
        id: impl Into<String>,
        mut f: impl FnMut(&Packet) -> Payload + Send + 'static,
    ) -> Self {
        Interceptor::new(id, move |p| {
            let payload = f(&p);
            Verdict::Pass(p.with_payload(payload))
        })
    }

    pub fn drop_all(id: impl Into<String>) -> Self {
        Interceptor::new(id, |_| Verdict::Drop)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn topic(&self) -> &str {
        &self.topic
    }

    pub fn order(&self) -> usize {
        self.order
    }
}

impl fmt::Debug for Interceptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Interceptor")
            .field("id", &self.id)
            .field("topic", &self.topic)
            .field("order", &self.order)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubscriptionHandle {
    pub topic: String,
    pub component_id: String,
}

#[derive(Debug, Default)]
struct TopicState {
    next_seq: u64,
    subscribers: Vec<String>,
    interceptors: Vec<Interceptor>,
}

#[derive(Debug, Default)]
pub struct SoftwareBus {
    tick: u64,
    topics: BTreeMap<String, TopicState>,
    queues: BTreeMap<String, Vec<Packet>>,
    log: Vec<Packet>,
}

impl SoftwareBus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    /// Advance simulation time; publishes within one tick share a stamp.
    pub fn step(&mut self) -> u64 {
        self.tick += 1;
        self.tick
    }

    pub fn subscribe(
        &mut self,
        topic: &str,
        component_id: &str,
    ) -> Result<SubscriptionHandle, BusError> {
        if topic.is_empty() {
            return Err(BusError::EmptyTopic);
        }
        if component_id.is_empty() {
            return Err(BusError::EmptyComponent);
        }
        let state = self.topics.entry(topic.to_owned()).or_default();
        if state.subscribers.iter().any(|s| s == component_id) {
            return Err(BusError::DuplicateSubscription {
                topic: topic.to_owned(),
                component: component_id.to_owned(),
            });
        }
        state.subscribers.push(component_id.to_owned());
        self.queues.entry(component_id.to_owned()).or_default();
        Ok(SubscriptionHandle {
            topic: topic.to_owned(),
            component_id: component_id.to_owned(),
        })
    }

    pub fn register_interceptor(
        &mut self,
        topic: &str,
        mut interceptor: Interceptor,
    ) -> Result<(), BusError> {
        if topic.is_empty() {
            return Err(BusError::EmptyTopic);
        }
        let state = self.topics.entry(topic.to_owned()).or_default();
        if state.interceptors.iter().any(|i| i.id == interceptor.id) {
            return Err(BusError::DuplicateInterceptor {
                topic: topic.to_owned(),
                id: interceptor.id,
            });
        }
        interceptor.topic = topic.to_owned();
        interceptor.order = state.interceptors.len();
        state.interceptors.push(interceptor);
        Ok(())
    }

    /// Publish a payload; returns how many subscribers received it.
    pub fn publish(&mut self, topic: &str, payload: Payload) -> usize {
        let state = self.topics.entry(topic.to_owned()).or_default();
        state.next_seq += 1;
        let seq = state.next_seq;
        let tick = self.tick;
        let mut packet = Packet::new(topic, seq, tick, payload);
        self.log.push(packet.clone());

        for interceptor in state.interceptors.iter_mut() {
            match (interceptor.transform)(packet) {
                Verdict::Pass(p) => {
                    packet = Packet::new(topic, seq, tick, p.payload);
                }
                Verdict::Drop => return 0,
            }
        }

        for sub in &state.subscribers {
            self.queues
                .get_mut(sub)
                .expect("subscriber queue exists")
                .push(packet.clone());
        }
        state.subscribers.len()
    }

    /// Take every queued packet for a component, ordered by
    /// `(tick, topic, seq)`.
    pub fn drain(&mut self, component_id: &str) -> Result<Vec<Packet>, BusError> {
        let queue = self
            .queues
            .get_mut(component_id)
            .ok_or_else(|| BusError::UnknownSubscriber(component_id.to_owned()))?;
        let mut packets = std::mem::take(queue);
        packets.sort_by(|a, b| (a.tick, &a.topic, a.seq).cmp(&(b.tick, &b.topic, b.seq)));
        Ok(packets)
    }

    /// Every packet as published, before interception.
    pub fn published(&self) -> &[Packet] {
        &self.log
    }

    pub fn interceptors(&self, topic: &str) -> impl Iterator<Item = &Interceptor> {
        self.topics
            .get(topic)
            .into_iter()
            .flat_map(|s| s.interceptors.iter())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(pixels: &[u8]) -> Payload {
        Payload::Frame(Frame::new(pixels.len() as u32, 1, pixels.to_vec()).unwrap())
    }

    fn telemetry(v: f64) -> Payload {
        Payload::Telemetry(TelemetryRecord {
            features: vec![v],
            target: v,
        })
    }

    fn add_to_frame(id: &str, delta: u8) -> Interceptor {
        Interceptor::map_payload(id, move |p| match p.payload() {
            Payload::Frame(f) => Payload::Frame(f.map_pixels(|_, v| v.saturating_add(delta))),
            other => other.clone(),
        })
    }

    #[test]
    fn single_subscriber_delivery() {
        let mut bus = SoftwareBus::new();
        bus.subscribe("gnc.telemetry", "gnc").unwrap();
        assert_eq!(bus.publish("gnc.telemetry", telemetry(1.0)), 1);
        assert_eq!(bus.drain("gnc").unwrap().len(), 1);
    }

    #[test]
    fn fan_out_same_packet() {
        let mut bus = SoftwareBus::new();
        bus.subscribe("t", "a").unwrap();
        bus.subscribe("t", "b").unwrap();
        assert_eq!(bus.publish("t", telemetry(2.0)), 2);
        let a = bus.drain("a").unwrap();
        let b = bus.drain("b").unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].seq(), 1);
        assert_eq!(a[0].payload_digest(), bus.published()[0].payload_digest());
    }

    #[test]
    fn duplicate_subscription() {
        let mut bus = SoftwareBus::new();
        bus.subscribe("t", "a").unwrap();
        assert!(matches!(
            bus.subscribe("t", "a"),
            Err(BusError::DuplicateSubscription { .. })
        ));
    }

    #[test]
    fn publish_without_subscribers() {
        let mut bus = SoftwareBus::new();
        assert_eq!(bus.publish("nobody", telemetry(0.0)), 0);
    }

    #[test]
    fn drop_interceptor() {
        let mut bus = SoftwareBus::new();
        bus.subscribe("t", "a").unwrap();
        bus.register_interceptor("t", Interceptor::drop_all("blackhole"))
            .unwrap();
        assert_eq!(bus.publish("t", telemetry(0.0)), 0);
        assert!(bus.drain("a").unwrap().is_empty());
    }

    #[test]
    fn duplicate_interceptor_id() {
        let mut bus = SoftwareBus::new();
        bus.register_interceptor("t", Interceptor::drop_all("x"))
            .unwrap();
        assert!(matches!(
            bus.register_interceptor("t", Interceptor::drop_all("x")),
            Err(BusError::DuplicateInterceptor { .. })
        ));
        // same id on another topic is fine
        bus.register_interceptor("u", Interceptor::drop_all("x"))
            .unwrap();
    }

    #[test]
    fn interceptors_compose_in_order() {
        let mut bus = SoftwareBus::new();
        bus.subscribe("trn.frames", "trn").unwrap();
        bus.register_interceptor("trn.frames", add_to_frame("a", 1))
            .unwrap();
        bus.register_interceptor("trn.frames", add_to_frame("b", 2))
            .unwrap();
        let orders: Vec<usize> = bus.interceptors("trn.frames").map(|i| i.order()).collect();
        assert_eq!(orders, vec![0, 1]);
        bus.publish("trn.frames", frame(&[10, 20]));
        let got = bus.drain("trn").unwrap();
        assert_eq!(got[0].payload().as_frame().unwrap().pixels(), &[13, 23]);
    }

    #[test]
    fn tampering_changes_digest_and_digest_tracks_payload() {
        let mut bus = SoftwareBus::new();
        bus.subscribe("trn.frames", "trn").unwrap();
        bus.register_interceptor("trn.frames", add_to_frame("a", 5))
            .unwrap();
        bus.publish("trn.frames", frame(&[1, 2, 3]));
        let delivered = bus.drain("trn").unwrap().remove(0);
        assert_ne!(
            delivered.payload_digest(),
            bus.published()[0].payload_digest()
        );
        assert_eq!(delivered.payload_digest(), delivered.payload().digest());
    }

    #[test]
    fn interceptor_is_topic_scoped() {
        let mut bus = SoftwareBus::new();
        bus.subscribe("trn.frames", "c").unwrap();
        bus.subscribe("gnc.telemetry", "c").unwrap();
        bus.register_interceptor("trn.frames", Interceptor::drop_all("x"))
            .unwrap();
        bus.publish("trn.frames", frame(&[1]));
        assert_eq!(bus.publish("gnc.telemetry", telemetry(3.0)), 1);
        let got = bus.drain("c").unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].topic(), "gnc.telemetry");
        assert_eq!(got[0].payload(), &telemetry(3.0));
    }

    #[test]
    fn drain_is_fifo_and_clears() {
        let mut bus = SoftwareBus::new();
        bus.subscribe("t", "a").unwrap();
        bus.publish("t", telemetry(1.0));
        bus.publish("t", telemetry(2.0));
        let first = bus.drain("a").unwrap();
        assert_eq!(
            first.iter().map(Packet::seq).collect::<Vec<_>>(),
            vec![1, 2]
        );
        assert!(bus.drain("a").unwrap().is_empty());
    }

    #[test]
    fn drain_orders_by_tick_topic_seq() {
        let mut bus = SoftwareBus::new();
        bus.subscribe("b", "c").unwrap();
        bus.subscribe("a", "c").unwrap();
        bus.publish("b", telemetry(1.0));
        bus.publish("a", telemetry(2.0));
        bus.step();
        bus.publish("a", telemetry(3.0));
        bus.publish("b", telemetry(4.0));
        let keys: Vec<(u64, String, u64)> = bus
            .drain("c")
            .unwrap()
            .iter()
            .map(|p| (p.tick(), p.topic().to_owned(), p.seq()))
            .collect();
        assert_eq!(
            keys,
            vec![
                (0, "a".into(), 1),
                (0, "b".into(), 1),
                (1, "a".into(), 2),
                (1, "b".into(), 2),
            ]
        );
    }

    #[test]
    fn unknown_subscriber() {
        let mut bus = SoftwareBus::new();
        assert_eq!(
            bus.drain("ghost"),
            Err(BusError::UnknownSubscriber("ghost".into()))
        );
    }

    #[test]
    fn command_digest_is_stable() {
        let c = Payload::Command(Command {
            opcode: "SET_ETA".into(),
            args: vec!["0.7".into()],
        });
        assert_eq!(c.digest(), c.clone().digest());
        assert_ne!(c.digest(), telemetry(0.7).digest());
    }
}
