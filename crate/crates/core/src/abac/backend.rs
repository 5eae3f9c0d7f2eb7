//! Encrypted policy evaluation backends.
//!
//! The pipeline is always `decrypt(eval(policy, encrypt(attributes)))`. The
//! simulated backend blinds payloads with a keyed ChaCha keystream and a fresh
//! nonce per ciphertext; evaluation happens inside the backend, which is the
//! only component that can read its own payloads.

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::policy::{eval_policy_plain, AttributeSchema, AttributeSet, Policy};
use crate::error::{Result, SimError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext {
    pub backend: String,
    pub payload: Vec<u8>,
}

pub trait EncryptionBackend: Send + Sync {
    fn name(&self) -> &'static str;

    fn encrypt(&self, attrs: &AttributeSet, rng: &mut dyn RngCore) -> Result<Ciphertext>;

    /// Evaluates `policy` over the attributes hidden in `ct`, yielding an
    /// encrypted boolean.
    fn eval(&self, policy: &Policy, ct: &Ciphertext, rng: &mut dyn RngCore) -> Result<Ciphertext>;

    fn decrypt_decision(&self, ct: &Ciphertext) -> Result<bool>;

    /// Test hook for round-trip checks.
    fn decrypt_attributes(&self, ct: &Ciphertext) -> Result<AttributeSet>;
}

const TAG_ATTRIBUTES: u8 = 0;
const TAG_DECISION: u8 = 1;
const HEADER: usize = 9;

pub struct SimulatedBackend {
    key: [u8; 32],
    schema: AttributeSchema,
}

impl SimulatedBackend {
    pub const NAME: &'static str = "simulated";

    pub fn new(key_seed: u64, schema: AttributeSchema) -> Self {
        let mut key = [0u8; 32];
        ChaCha8Rng::seed_from_u64(key_seed).fill_bytes(&mut key);
        Self { key, schema }
    }

    fn keystream(&self, nonce: u64, len: usize) -> Vec<u8> {
        let mut seed = self.key;
        for (s, n) in seed.iter_mut().zip(nonce.to_le_bytes()) {
            *s ^= n;
        }
        let mut out = vec![0u8; len];
        ChaCha8Rng::from_seed(seed).fill_bytes(&mut out);
        out
    }

    fn seal(&self, tag: u8, body: &[u8], rng: &mut dyn RngCore) -> Ciphertext {
        let nonce = rng.next_u64();
        let ks = self.keystream(nonce, body.len());
        let mut payload = Vec::with_capacity(HEADER + body.len());
        payload.push(tag);
        payload.extend_from_slice(&nonce.to_le_bytes());
        payload.extend(body.iter().zip(&ks).map(|(b, k)| b ^ k));
        Ciphertext {
            backend: Self::NAME.to_string(),
            payload,
        }
    }

    fn open(&self, ct: &Ciphertext, expected_tag: u8) -> Result<Vec<u8>> {
        if ct.backend != Self::NAME {
            return Err(SimError::BackendMismatch {
                expected: Self::NAME.to_string(),
                found: ct.backend.clone(),
            });
        }
        if ct.payload.len() < HEADER {
            return Err(SimError::MalformedCiphertext("truncated header".into()));
        }
        if ct.payload[0] != expected_tag {
            return Err(SimError::MalformedCiphertext("unexpected payload kind".into()));
        }
        let nonce = u64::from_le_bytes(ct.payload[1..HEADER].try_into().expect("8 bytes"));
        let body = &ct.payload[HEADER..];
        let ks = self.keystream(nonce, body.len());
        Ok(body.iter().zip(&ks).map(|(b, k)| b ^ k).collect())
    }
}

fn encode_attributes(attrs: &AttributeSet) -> Vec<u8> {
    let mut body = Vec::new();
    body.extend_from_slice(&(attrs.len() as u16).to_le_bytes());
    for (name, value) in attrs.iter() {
        body.push(name.len() as u8);
        body.extend_from_slice(name.as_bytes());
        body.extend_from_slice(&value.to_le_bytes());
    }
    body
}

fn decode_attributes(body: &[u8]) -> Result<AttributeSet> {
    let bad = || SimError::MalformedCiphertext("attribute body".into());
    let mut pos = 2;
    let count = u16::from_le_bytes(body.get(0..2).ok_or_else(bad)?.try_into().unwrap());
    let mut values = BTreeMap::new();
    for _ in 0..count {
        let len = *body.get(pos).ok_or_else(bad)? as usize;
        pos += 1;
        let name = std::str::from_utf8(body.get(pos..pos + len).ok_or_else(bad)?)
            .map_err(|_| bad())?
            .to_string();
        pos += len;
        let raw: [u8; 8] = body.get(pos..pos + 8).ok_or_else(bad)?.try_into().unwrap();
        pos += 8;
        values.insert(name, i64::from_le_bytes(raw));
    }
    Ok(AttributeSet::from_raw(values))
}

impl EncryptionBackend for SimulatedBackend {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn encrypt(&self, attrs: &AttributeSet, rng: &mut dyn RngCore) -> Result<Ciphertext> {
        attrs.check(&self.schema)?;
        Ok(self.seal(TAG_ATTRIBUTES, &encode_attributes(attrs), rng))
    }

    fn eval(&self, policy: &Policy, ct: &Ciphertext, rng: &mut dyn RngCore) -> Result<Ciphertext> {
        let attrs = decode_attributes(&self.open(ct, TAG_ATTRIBUTES)?)?;
        let decision = eval_policy_plain(policy, &attrs)?;
        Ok(self.seal(TAG_DECISION, &[u8::from(decision)], rng))
    }

    fn decrypt_decision(&self, ct: &Ciphertext) -> Result<bool> {
        match self.open(ct, TAG_DECISION)?.as_slice() {
            [0] => Ok(false),
            [1] => Ok(true),
            _ => Err(SimError::MalformedCiphertext("decision body".into())),
        }
    }

    fn decrypt_attributes(&self, ct: &Ciphertext) -> Result<AttributeSet> {
        decode_attributes(&self.open(ct, TAG_ATTRIBUTES)?)
    }
}

type BackendCtor = fn(u64, AttributeSchema) -> Box<dyn EncryptionBackend>;

const BACKENDS: &[(&str, BackendCtor)] = &[(SimulatedBackend::NAME, |seed, schema| {
    Box::new(SimulatedBackend::new(seed, schema))
})];

pub fn backend_names() -> impl Iterator<Item = &'static str> {
    BACKENDS.iter().map(|(n, _)| *n)
}

pub fn build_backend(name: &str, key_seed: u64, schema: AttributeSchema) -> Result<Box<dyn EncryptionBackend>> {
    BACKENDS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, ctor)| ctor(key_seed, schema))
        .ok_or_else(|| SimError::UnknownStrategy {
            kind: "encryption backend",
            name: name.to_string(),
        })
}
