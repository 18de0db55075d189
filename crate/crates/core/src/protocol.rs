//! Decentralized hash-based exposure matching.
//!
//! Clients keep plaintext venue visits on the local log only. A confirmed
//! patient uploads SHA-256 digests of venue ids (with visit intervals) for
//! the retention window; the authority deduplicates and broadcasts the
//! digests; every client re-hashes its own venue ids locally and alerts on
//! digest matches with overlapping intervals. No plaintext venue id ever
//! appears in an upload or broadcast.
//!
//! Digests are unsalted, so small venue universes are open to dictionary
//! enumeration by recipients; the scheme trades that for having no shared
//! secrets at all.

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

pub type ClientId = u32;

pub const MAX_VENUE_ID_BYTES: usize = 256;
pub const MS_PER_DAY: i64 = 86_400_000;

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("venue id must be non-empty and at most {MAX_VENUE_ID_BYTES} bytes")]
    InvalidVenueId,
    #[error("visit interval [{checkin_ms}, {checkout_ms}) is invalid")]
    InvalidInterval { checkin_ms: i64, checkout_ms: i64 },
    #[error("visit overlaps an existing visit of the same client")]
    OverlappingVisit,
    #[error("malformed upload from client {patient}: {reason}")]
    MalformedUpload { patient: ClientId, reason: String },
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

/// Identifier scanned from a venue's QR/NFC tag. Non-empty UTF-8, at most
/// [`MAX_VENUE_ID_BYTES`] bytes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VenueId(String);

impl VenueId {
    pub fn new(id: impl Into<String>) -> Result<Self, ProtocolError> {
        let id = id.into();
        if id.is_empty() || id.len() > MAX_VENUE_ID_BYTES {
            return Err(ProtocolError::InvalidVenueId);
        }
        Ok(Self(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VenueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// 256-bit venue digest; serialized as 64 lowercase hex characters.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VenueDigest(pub [u8; 32]);

impl VenueDigest {
    pub fn to_hex(self) -> String {
        hex::encode(self.0)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Debug for VenueDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VenueDigest({})", self.to_hex())
    }
}

impl fmt::Display for VenueDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for VenueDigest {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for VenueDigest {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        let bytes = hex::decode(&text).map_err(serde::de::Error::custom)?;
        let array: [u8; 32] = bytes
            .try_into()
            .map_err(|_| serde::de::Error::custom("digest must be 32 bytes"))?;
        Ok(Self(array))
    }
}

/// SHA-256 over the UTF-8 bytes of the venue id. Patients and clients run
/// the same function, which is what makes local cross-checking possible.
pub fn hash_venue(venue: &VenueId) -> VenueDigest {
    VenueDigest(Sha256::digest(venue.as_str().as_bytes()).into())
}

/// A plaintext visit on the device-local log. Never transmitted as-is.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisitRecord {
    pub venue: VenueId,
    pub checkin_ms: i64,
    pub checkout_ms: i64,
}

/// The wire form of a visit: digest plus interval, venue id dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HashedVisit {
    pub digest: VenueDigest,
    pub checkin_ms: i64,
    pub checkout_ms: i64,
}

/// Retention and exposure-overlap policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExposurePolicy {
    /// How many days of history a confirmed patient uploads.
    #[serde(default = "default_retention_days")]
    pub retention_days: u32,
    /// Slack added around the client's own interval before testing overlap.
    #[serde(default)]
    pub slack_ms: i64,
}

fn default_retention_days() -> u32 {
    14
}

impl Default for ExposurePolicy {
    fn default() -> Self {
        Self {
            retention_days: default_retention_days(),
            slack_ms: 0,
        }
    }
}

impl ExposurePolicy {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.retention_days < 1 {
            return Err(ProtocolError::InvalidPolicy(
                "retention_days must be >= 1".into(),
            ));
        }
        if self.slack_ms < 0 {
            return Err(ProtocolError::InvalidPolicy("slack_ms must be >= 0".into()));
        }
        Ok(())
    }

    /// Earliest checkout (inclusive) still inside the retention window at
    /// `now_ms`.
    pub fn retention_cutoff_ms(&self, now_ms: i64) -> i64 {
        now_ms - i64::from(self.retention_days) * MS_PER_DAY
    }
}

/// Patient upload to the authority: digests only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Upload {
    pub patient: ClientId,
    pub sent_ms: i64,
    pub visits: Vec<HashedVisit>,
}

/// Authority broadcast to all clients: deduplicated union of uploads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Broadcast {
    pub sent_ms: i64,
    pub visits: Vec<HashedVisit>,
}

/// A local digest match: the client's own visit overlapped a broadcast
/// patient visit at the same hashed venue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Alert {
    pub client: ClientId,
    pub digest: VenueDigest,
    pub patient_checkin_ms: i64,
    pub patient_checkout_ms: i64,
    pub client_checkin_ms: i64,
    pub client_checkout_ms: i64,
}

impl Alert {
    /// Re-check the overlap predicate this alert claims.
    pub fn satisfies_overlap(&self, policy: &ExposurePolicy) -> bool {
        self.client_checkin_ms - policy.slack_ms < self.patient_checkout_ms
            && self.patient_checkin_ms < self.client_checkout_ms + policy.slack_ms
    }
}

/// One participant's device state: the plaintext visit log plus, for
/// patients, the digests already uploaded (so they do not alert on their own
/// records).
#[derive(Debug, Clone, PartialEq)]
pub struct ClientLog {
    id: ClientId,
    visits: Vec<VisitRecord>,
    uploaded: Vec<HashedVisit>,
}

impl ClientLog {
    pub fn new(id: ClientId) -> Self {
        Self {
            id,
            visits: Vec::new(),
            uploaded: Vec::new(),
        }
    }

    pub fn id(&self) -> ClientId {
        self.id
    }

    pub fn visits(&self) -> &[VisitRecord] {
        &self.visits
    }

    pub fn uploaded(&self) -> &[HashedVisit] {
        &self.uploaded
    }

    /// Append a visit to the local log. A person is in one venue at a time,
    /// so the interval must not overlap any existing visit.
    pub fn record_visit(
        &mut self,
        venue: VenueId,
        checkin_ms: i64,
        checkout_ms: i64,
    ) -> Result<(), ProtocolError> {
        if checkin_ms >= checkout_ms {
            return Err(ProtocolError::InvalidInterval {
                checkin_ms,
                checkout_ms,
            });
        }
        let overlaps = self
            .visits
            .iter()
            .any(|v| checkin_ms < v.checkout_ms && v.checkin_ms < checkout_ms);
        if overlaps {
            return Err(ProtocolError::OverlappingVisit);
        }
        self.visits.push(VisitRecord {
            venue,
            checkin_ms,
            checkout_ms,
        });
        Ok(())
    }

    /// Build the upload for a patient confirmed at `now_ms`: every visit
    /// whose checkout is inside the retention window, hashed. The uploaded
    /// entries are remembered for self-exclusion during matching. An empty
    /// upload is legitimate.
    pub fn patient_upload(&mut self, now_ms: i64, policy: &ExposurePolicy) -> Upload {
        let cutoff = policy.retention_cutoff_ms(now_ms);
        let visits: Vec<HashedVisit> = self
            .visits
            .iter()
            .filter(|v| v.checkout_ms >= cutoff)
            .map(|v| HashedVisit {
                digest: hash_venue(&v.venue),
                checkin_ms: v.checkin_ms,
                checkout_ms: v.checkout_ms,
            })
            .collect();
        self.uploaded.extend(visits.iter().copied());
        Upload {
            patient: self.id,
            sent_ms: now_ms,
            visits,
        }
    }

    /// Local cross-check of the broadcast against the plaintext log. Only
    /// this client's data is read; broadcast entries the client itself
    /// uploaded are skipped.
    pub fn cross_check(&self, broadcast: &Broadcast, policy: &ExposurePolicy) -> BTreeSet<Alert> {
        let own_uploads: BTreeSet<HashedVisit> = self.uploaded.iter().copied().collect();
        let mut alerts = BTreeSet::new();
        for visit in &self.visits {
            let digest = hash_venue(&visit.venue);
            for entry in &broadcast.visits {
                if own_uploads.contains(entry) {
                    continue;
                }
                if entry.digest != digest {
                    continue;
                }
                let overlap = visit.checkin_ms - policy.slack_ms < entry.checkout_ms
                    && entry.checkin_ms < visit.checkout_ms + policy.slack_ms;
                if overlap {
                    alerts.insert(Alert {
                        client: self.id,
                        digest,
                        patient_checkin_ms: entry.checkin_ms,
                        patient_checkout_ms: entry.checkout_ms,
                        client_checkin_ms: visit.checkin_ms,
                        client_checkout_ms: visit.checkout_ms,
                    });
                }
            }
        }
        alerts
    }
}

/// Authority relay: validate uploads and emit the deduplicated union of all
/// received hashed visits. The authority stores and forwards digests only.
pub fn authority_broadcast(uploads: &[Upload], sent_ms: i64) -> Result<Broadcast, ProtocolError> {
    let mut union: BTreeSet<HashedVisit> = BTreeSet::new();
    for upload in uploads {
        for visit in &upload.visits {
            if visit.checkin_ms >= visit.checkout_ms {
                return Err(ProtocolError::MalformedUpload {
                    patient: upload.patient,
                    reason: format!(
                        "interval [{}, {}) is invalid",
                        visit.checkin_ms, visit.checkout_ms
                    ),
                });
            }
            union.insert(*visit);
        }
    }
    Ok(Broadcast {
        sent_ms,
        visits: union.into_iter().collect(),
    })
}
