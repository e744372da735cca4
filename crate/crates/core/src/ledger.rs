//! Simulated ledger and content-addressed store.
//!
//! The ledger is an append-only log of write-once key/value transactions. The
//! content store maps `FID = SHA-256(tag || bytes)` to bytes. Together they
//! hold MIT records (`Hid -> FID`) and first impressions (`I_AB -> FID`).
//!
//! Each namespace has a fixed slot budget. Entries larger than their slot
//! are refused, and [`Store::accounting`] reports both the bytes actually
//! serialized and the slot space reserved.
//!
//! Snapshot layout:
//!
//! ```text
//! "CHSCSNAP" | version u16 | profile tag
//! | tx count u64 | tx entries in seq order
//! | content count u64 | content entries sorted by FID
//! | SHA-256 of everything above
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::identity::{FirstImpressionIndex, Hid};
use crate::wire::{self, Reader};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"CHSCSNAP";
pub const SNAPSHOT_VERSION: u16 = 1;

pub const KB: usize = 1024;
pub const MIT_SLOT_BYTES: usize = 256 * KB;
pub const INDEX_SLOT_BYTES: usize = KB;
pub const FI_CONTENT_SLOT_BYTES: usize = 32 * KB;

const FID_TAG: &[u8] = b"CHSC-V01-FID";

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum StoreError {
    #[error("content {0} not found")]
    NotFound(ContentId),
    #[error("key {0} already written")]
    DuplicateKey(String),
    #[error("{namespace:?} entry of {size} bytes exceeds its {budget}-byte slot")]
    BudgetExceeded {
        namespace: Namespace,
        size: usize,
        budget: usize,
    },
    #[error("integrity: {0}")]
    Integrity(String),
    #[error("i/o: {0}")]
    Io(String),
}

/// Storage namespace of a ledger or content entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Namespace {
    /// Ledger: `Hid -> FID` of the MIT record.
    MitIndex,
    /// Content: serialized MIT.
    MitRecord,
    /// Ledger: `I_AB -> FID` of the first-impression ciphertext.
    FiIndex,
    /// Content: serialized first-impression envelope.
    FiContent,
}

impl Namespace {
    pub const ALL: [Namespace; 4] = [
        Namespace::MitIndex,
        Namespace::MitRecord,
        Namespace::FiIndex,
        Namespace::FiContent,
    ];

    pub fn slot_bytes(self) -> usize {
        match self {
            Namespace::MitIndex | Namespace::FiIndex => INDEX_SLOT_BYTES,
            Namespace::MitRecord => MIT_SLOT_BYTES,
            Namespace::FiContent => FI_CONTENT_SLOT_BYTES,
        }
    }

    fn tag(self) -> u8 {
        match self {
            Namespace::MitIndex => 1,
            Namespace::MitRecord => 2,
            Namespace::FiIndex => 3,
            Namespace::FiContent => 4,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        Namespace::ALL.into_iter().find(|n| n.tag() == tag)
    }

    fn is_ledger(self) -> bool {
        matches!(self, Namespace::MitIndex | Namespace::FiIndex)
    }
}

/// Content address (FID).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ContentId(#[serde(with = "hex::serde")] pub [u8; 32]);

impl ContentId {
    pub fn of(content: &[u8]) -> Self {
        let mut h = Sha256::new();
        h.update(FID_TAG);
        h.update(content);
        ContentId(h.finalize().into())
    }

    pub fn from_slice(bytes: &[u8]) -> Option<Self> {
        bytes.try_into().ok().map(ContentId)
    }
}

impl fmt::Display for ContentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Debug for ContentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fid({})", &hex::encode(self.0)[..16])
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LedgerTransaction {
    pub seq: u64,
    pub namespace: Namespace,
    pub key: Vec<u8>,
    pub value: Vec<u8>,
}

impl LedgerTransaction {
    fn write(&self, out: &mut Vec<u8>) {
        out.push(self.namespace.tag());
        wire::put_u64(out, self.seq);
        wire::put_bytes(out, &self.key);
        wire::put_bytes(out, &self.value);
    }

    /// Bytes this entry occupies in a snapshot.
    pub fn serialized_len(&self) -> usize {
        1 + 8 + 4 + self.key.len() + 4 + self.value.len()
    }
}

/// Append-only log with write-once keys.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Ledger {
    txs: Vec<LedgerTransaction>,
    by_key: HashMap<Vec<u8>, usize>,
}

impl Ledger {
    /// Appends `(key, value)`. Refuses keys already present.
    pub fn put(&mut self, namespace: Namespace, key: &[u8], value: &[u8]) -> Result<u64, StoreError> {
        if self.by_key.contains_key(key) {
            return Err(StoreError::DuplicateKey(hex::encode(key)));
        }
        let tx = LedgerTransaction {
            seq: self.txs.last().map_or(1, |t| t.seq + 1),
            namespace,
            key: key.to_vec(),
            value: value.to_vec(),
        };
        let size = tx.serialized_len();
        if size > namespace.slot_bytes() {
            return Err(StoreError::BudgetExceeded {
                namespace,
                size,
                budget: namespace.slot_bytes(),
            });
        }
        let seq = tx.seq;
        self.by_key.insert(tx.key.clone(), self.txs.len());
        self.txs.push(tx);
        Ok(seq)
    }

    pub fn get(&self, key: &[u8]) -> Option<&[u8]> {
        self.by_key.get(key).map(|&i| self.txs[i].value.as_slice())
    }

    pub fn transactions(&self) -> &[LedgerTransaction] {
        &self.txs
    }

    pub fn len(&self) -> usize {
        self.txs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.txs.is_empty()
    }

    /// `hex key -> hex value`, one line per transaction, in seq order.
    pub fn dump(&self) -> String {
        self.txs
            .iter()
            .map(|t| format!("{} -> {}\n", hex::encode(&t.key), hex::encode(&t.value)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct ContentEntry {
    namespace: Namespace,
    bytes: Vec<u8>,
}

impl ContentEntry {
    fn serialized_len(&self) -> usize {
        1 + 32 + 4 + self.bytes.len()
    }
}

/// Content-addressed blob store.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ContentStore {
    entries: BTreeMap<ContentId, ContentEntry>,
}

impl ContentStore {
    /// Stores `content`; idempotent for identical bytes.
    pub fn put(&mut self, namespace: Namespace, content: &[u8]) -> Result<ContentId, StoreError> {
        let entry = ContentEntry {
            namespace,
            bytes: content.to_vec(),
        };
        if entry.serialized_len() > namespace.slot_bytes() {
            return Err(StoreError::BudgetExceeded {
                namespace,
                size: entry.serialized_len(),
                budget: namespace.slot_bytes(),
            });
        }
        let fid = ContentId::of(content);
        self.entries.entry(fid).or_insert(entry);
        Ok(fid)
    }

    /// Fetches and re-hashes the bytes stored under `fid`.
    pub fn get(&self, fid: &ContentId) -> Result<Vec<u8>, StoreError> {
        let entry = self.entries.get(fid).ok_or(StoreError::NotFound(*fid))?;
        if ContentId::of(&entry.bytes) != *fid {
            return Err(StoreError::Integrity(format!("content under {fid} does not hash to it")));
        }
        Ok(entry.bytes.clone())
    }

    pub fn contains(&self, fid: &ContentId) -> bool {
        self.entries.contains_key(fid)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &ContentId> {
        self.entries.keys()
    }

    pub(crate) fn remove(&mut self, fid: &ContentId) {
        self.entries.remove(fid);
    }
}

/// Per-namespace size accounting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct NamespaceUsage {
    pub entries: usize,
    /// Sum of serialized entry sizes.
    pub used_bytes: usize,
    /// `entries * slot size`.
    pub reserved_bytes: usize,
}

impl NamespaceUsage {
    fn add(&mut self, ns: Namespace, size: usize) {
        self.entries += 1;
        self.used_bytes += size;
        self.reserved_bytes += ns.slot_bytes();
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct StoreSnapshot {
    pub usage: BTreeMap<Namespace, NamespaceUsage>,
}

impl StoreSnapshot {
    pub fn get(&self, ns: Namespace) -> NamespaceUsage {
        self.usage.get(&ns).copied().unwrap_or_default()
    }

    pub fn total_used(&self) -> usize {
        self.usage.values().map(|u| u.used_bytes).sum()
    }
}

/// First-impression storage attributed to one user.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FiFootprint {
    pub records: usize,
    pub index: NamespaceUsage,
    pub content: NamespaceUsage,
}

impl FiFootprint {
    pub fn reserved_bytes(&self) -> usize {
        self.index.reserved_bytes + self.content.reserved_bytes
    }

    pub fn used_bytes(&self) -> usize {
        self.index.used_bytes + self.content.used_bytes
    }
}

/// Ledger and content store under one owner.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Store {
    pub ledger: Ledger,
    pub content: ContentStore,
}

/// Single writer, many readers.
pub type SharedStore = Arc<RwLock<Store>>;

pub fn shared(store: Store) -> SharedStore {
    Arc::new(RwLock::new(store))
}

impl Store {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn store_put(&mut self, namespace: Namespace, content: &[u8]) -> Result<ContentId, StoreError> {
        self.content.put(namespace, content)
    }

    pub fn store_get(&self, fid: &ContentId) -> Result<Vec<u8>, StoreError> {
        self.content.get(fid)
    }

    pub fn ledger_put(&mut self, namespace: Namespace, key: &[u8], value: &[u8]) -> Result<u64, StoreError> {
        self.ledger.put(namespace, key, value)
    }

    pub fn ledger_get(&self, key: &[u8]) -> Option<&[u8]> {
        self.ledger.get(key)
    }

    /// Stores `content` and indexes it under `key`. If the index write is
    /// refused, content first stored by this call is removed again.
    pub fn put_indexed(
        &mut self,
        index: Namespace,
        content_ns: Namespace,
        key: &[u8],
        content: &[u8],
    ) -> Result<(ContentId, u64), StoreError> {
        let fid = ContentId::of(content);
        let existed = self.content.contains(&fid);
        self.content.put(content_ns, content)?;
        match self.ledger.put(index, key, &fid.0) {
            Ok(seq) => Ok((fid, seq)),
            Err(e) => {
                if !existed {
                    self.content.remove(&fid);
                }
                Err(e)
            }
        }
    }

    /// Follows `key` through the ledger into the content store.
    pub fn resolve(&self, key: &[u8]) -> Result<Option<Vec<u8>>, StoreError> {
        let Some(value) = self.ledger.get(key) else {
            return Ok(None);
        };
        let fid = ContentId::from_slice(value)
            .ok_or_else(|| StoreError::Integrity("index value is not a FID".into()))?;
        self.content.get(&fid).map(Some)
    }

    pub fn accounting(&self) -> StoreSnapshot {
        let mut snap = StoreSnapshot::default();
        for tx in self.ledger.transactions() {
            snap.usage
                .entry(tx.namespace)
                .or_default()
                .add(tx.namespace, tx.serialized_len());
        }
        for entry in self.content.entries.values() {
            snap.usage
                .entry(entry.namespace)
                .or_default()
                .add(entry.namespace, entry.serialized_len());
        }
        snap
    }

    /// First impressions whose index names `owner` as the scene's sender.
    pub fn fi_footprint(&self, owner: &Hid) -> FiFootprint {
        let mut fp = FiFootprint::default();
        for tx in self.ledger.transactions() {
            if tx.namespace != Namespace::FiIndex {
                continue;
            }
            let Ok(index) = FirstImpressionIndex::from_bytes(&tx.key) else {
                continue;
            };
            if index.owner != *owner {
                continue;
            }
            fp.records += 1;
            fp.index.add(Namespace::FiIndex, tx.serialized_len());
            if let Some(entry) = ContentId::from_slice(&tx.value).and_then(|f| self.content.entries.get(&f)) {
                fp.content.add(Namespace::FiContent, entry.serialized_len());
            }
        }
        fp
    }

    /// Bytes of the header and checksum around the entries in a snapshot.
    pub fn snapshot_overhead() -> usize {
        8 + 2 + 1 + crate::group::PROFILE_NAME.len() + 8 + 8 + 32
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_be_bytes());
        wire::put_profile_tag(&mut out);
        wire::put_u64(&mut out, self.ledger.len() as u64);
        for tx in self.ledger.transactions() {
            tx.write(&mut out);
        }
        wire::put_u64(&mut out, self.content.len() as u64);
        for (fid, entry) in &self.content.entries {
            out.push(entry.namespace.tag());
            out.extend_from_slice(&fid.0);
            wire::put_bytes(&mut out, &entry.bytes);
        }
        let digest: [u8; 32] = Sha256::digest(&out).into();
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, StoreError> {
        let integrity = |e: crate::Error| StoreError::Integrity(e.to_string());
        if bytes.len() < Self::snapshot_overhead() {
            return Err(StoreError::Integrity("snapshot truncated".into()));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(StoreError::Integrity("snapshot checksum mismatch".into()));
        }
        let mut r = Reader::new(body, "snapshot");
        if r.take(8).map_err(integrity)? != SNAPSHOT_MAGIC {
            return Err(StoreError::Integrity("bad magic".into()));
        }
        let version = u16::from_be_bytes(r.array().map_err(integrity)?);
        if version != SNAPSHOT_VERSION {
            return Err(StoreError::Integrity(format!("unsupported version {version}")));
        }
        r.profile_tag().map_err(integrity)?;

        let mut store = Store::new();
        let n_tx = r.u64().map_err(integrity)?;
        let mut last_seq = 0;
        for _ in 0..n_tx {
            let ns = Namespace::from_tag(r.u8().map_err(integrity)?)
                .filter(|n| n.is_ledger())
                .ok_or_else(|| StoreError::Integrity("bad ledger namespace".into()))?;
            let seq = r.u64().map_err(integrity)?;
            let key = r.bytes().map_err(integrity)?.to_vec();
            let value = r.bytes().map_err(integrity)?.to_vec();
            if seq <= last_seq {
                return Err(StoreError::Integrity("sequence numbers not increasing".into()));
            }
            if store.ledger.by_key.contains_key(&key) {
                return Err(StoreError::Integrity("duplicate ledger key".into()));
            }
            last_seq = seq;
            store.ledger.by_key.insert(key.clone(), store.ledger.txs.len());
            store.ledger.txs.push(LedgerTransaction {
                seq,
                namespace: ns,
                key,
                value,
            });
        }
        let n_content = r.u64().map_err(integrity)?;
        for _ in 0..n_content {
            let ns = Namespace::from_tag(r.u8().map_err(integrity)?)
                .filter(|n| !n.is_ledger())
                .ok_or_else(|| StoreError::Integrity("bad content namespace".into()))?;
            let fid = ContentId(r.array().map_err(integrity)?);
            let bytes = r.bytes().map_err(integrity)?.to_vec();
            if ContentId::of(&bytes) != fid {
                return Err(StoreError::Integrity(format!("content under {fid} does not hash to it")));
            }
            store.content.entries.insert(fid, ContentEntry { namespace: ns, bytes });
        }
        r.finish().map_err(integrity)?;
        Ok(store)
    }

    pub fn persist(&self, path: &Path) -> Result<(), StoreError> {
        std::fs::write(path, self.to_bytes()).map_err(|e| StoreError::Io(e.to_string()))
    }

    pub fn restore(path: &Path) -> Result<Self, StoreError> {
        let bytes = std::fs::read(path).map_err(|e| StoreError::Io(e.to_string()))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn content_roundtrip_and_idempotence() {
        let mut s = Store::new();
        for blob in [vec![], vec![1u8], vec![9u8; 32 * KB - 64]] {
            let fid = s.store_put(Namespace::FiContent, &blob).unwrap();
            assert_eq!(s.store_get(&fid).unwrap(), blob);
        }
        let a = s.store_put(Namespace::FiContent, b"x").unwrap();
        let n = s.content.len();
        assert_eq!(s.store_put(Namespace::FiContent, b"x").unwrap(), a);
        assert_eq!(s.content.len(), n);
        let unknown = ContentId([0xaa; 32]);
        assert_eq!(s.store_get(&unknown), Err(StoreError::NotFound(unknown)));
    }

    #[test]
    fn budgets_enforced() {
        let mut s = Store::new();
        assert!(matches!(
            s.store_put(Namespace::FiContent, &vec![0u8; 32 * KB]),
            Err(StoreError::BudgetExceeded { .. })
        ));
        assert!(matches!(
            s.ledger_put(Namespace::FiIndex, &[0u8; 64], &[0u8; 1000]),
            Err(StoreError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn write_once_keys() {
        let mut s = Store::new();
        assert_eq!(s.ledger_put(Namespace::FiIndex, b"k", b"v1").unwrap(), 1);
        assert!(matches!(
            s.ledger_put(Namespace::FiIndex, b"k", b"v2"),
            Err(StoreError::DuplicateKey(_))
        ));
        assert_eq!(s.ledger_get(b"k"), Some(&b"v1"[..]));
        assert_eq!(s.ledger_get(b"absent"), None);
        assert_eq!(s.ledger_put(Namespace::FiIndex, b"k2", b"v").unwrap(), 2);
    }

    #[test]
    fn put_indexed_rolls_back_new_content() {
        let mut s = Store::new();
        s.ledger_put(Namespace::FiIndex, b"taken", b"v").unwrap();
        let before = s.clone();
        assert!(s
            .put_indexed(Namespace::FiIndex, Namespace::FiContent, b"taken", b"blob")
            .is_err());
        assert_eq!(s, before);
        let (fid, _) = s
            .put_indexed(Namespace::FiIndex, Namespace::FiContent, b"free", b"blob")
            .unwrap();
        assert_eq!(s.resolve(b"free").unwrap().unwrap(), b"blob");
        assert!(s.content.contains(&fid));
    }

    #[test]
    fn snapshot_roundtrip_and_corruption() {
        let mut s = Store::new();
        s.put_indexed(Namespace::MitIndex, Namespace::MitRecord, &[1u8; 32], &[5u8; 4000])
            .unwrap();
        s.put_indexed(Namespace::FiIndex, Namespace::FiContent, &[2u8; 64], &[6u8; 20000])
            .unwrap();
        let bytes = s.to_bytes();
        let back = Store::from_bytes(&bytes).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(bytes.len(), Store::snapshot_overhead() + s.accounting().total_used());

        assert!(matches!(
            Store::from_bytes(&bytes[..bytes.len() - 1]),
            Err(StoreError::Integrity(_))
        ));
        let mut flipped = bytes.clone();
        flipped[40] ^= 1;
        assert!(matches!(Store::from_bytes(&flipped), Err(StoreError::Integrity(_))));
    }

    #[test]
    fn dump_lines() {
        let mut s = Store::new();
        s.ledger_put(Namespace::FiIndex, &[0xab], &[0xcd, 0xef]).unwrap();
        assert_eq!(s.ledger.dump(), "ab -> cdef\n");
    }
}
