//! Attribute-based access control evaluated through an encrypted pipeline.

mod backend;
mod policy;

pub use backend::{backend_names, build_backend, Ciphertext, EncryptionBackend, SimulatedBackend};
pub use policy::{
    eval_policy_plain, quantize_trust, AttributeSchema, AttributeSet, Comparison, Policy,
    DEFAULT_POLICY, ROLE_DELEGATE, ROLE_OBSERVER, ROLE_VALIDATOR,
};

use rand::RngCore;

use crate::error::Result;

pub fn encrypt_attributes(
    attrs: &AttributeSet,
    backend: &dyn EncryptionBackend,
    rng: &mut dyn RngCore,
) -> Result<Ciphertext> {
    backend.encrypt(attrs, rng)
}

pub fn eval_policy_encrypted(
    policy: &Policy,
    ct: &Ciphertext,
    backend: &dyn EncryptionBackend,
    rng: &mut dyn RngCore,
) -> Result<Ciphertext> {
    backend.eval(policy, ct, rng)
}

/// Static attributes every simulated device presents alongside its trust.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeviceProfile {
    pub role: i64,
    pub permissions: i64,
    pub clearance: i64,
}

impl Default for DeviceProfile {
    fn default() -> Self {
        Self {
            role: ROLE_VALIDATOR,
            permissions: 0b11,
            clearance: 3,
        }
    }
}

/// Admission control for consensus participation.
pub struct AccessGate {
    policy: Policy,
    schema: AttributeSchema,
    backend: Box<dyn EncryptionBackend>,
    device: DeviceProfile,
}

impl AccessGate {
    pub fn new(policy: Policy, backend_name: &str, key_seed: u64) -> Result<Self> {
        let schema = AttributeSchema::default();
        policy.validate(&schema)?;
        let backend = build_backend(backend_name, key_seed, schema.clone())?;
        Ok(Self {
            policy,
            schema,
            backend,
            device: DeviceProfile::default(),
        })
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn attributes_for(&self, trust: f64) -> Result<AttributeSet> {
        AttributeSet::new(
            &self.schema,
            [
                ("trust", quantize_trust(trust)),
                ("role", self.device.role),
                ("permissions", self.device.permissions),
                ("clearance", self.device.clearance),
            ],
        )
    }

    /// Full encrypt, evaluate, decrypt round for one node.
    pub fn admit(&self, trust: f64, rng: &mut dyn RngCore) -> Result<bool> {
        let attrs = self.attributes_for(trust)?;
        let ct = encrypt_attributes(&attrs, self.backend.as_ref(), rng)?;
        let verdict = eval_policy_encrypted(&self.policy, &ct, self.backend.as_ref(), rng)?;
        self.backend.decrypt_decision(&verdict)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    fn backend() -> SimulatedBackend {
        SimulatedBackend::new(11, AttributeSchema::default())
    }

    fn attrs(pairs: &[(&str, i64)]) -> AttributeSet {
        AttributeSet::new(&AttributeSchema::default(), pairs.iter().map(|(k, v)| (*k, *v))).unwrap()
    }

    fn decide(policy: &str, a: &AttributeSet) -> bool {
        let b = backend();
        let mut rng = stream(1, "abac", 0);
        let ct = encrypt_attributes(a, &b, &mut rng).unwrap();
        let out = eval_policy_encrypted(&Policy::parse(policy).unwrap(), &ct, &b, &mut rng).unwrap();
        b.decrypt_decision(&out).unwrap()
    }

    #[test]
    fn round_trip_recovers_attributes() {
        let b = backend();
        let a = attrs(&[("trust", 50), ("role", 2), ("clearance", 3), ("permissions", 200)]);
        let ct = encrypt_attributes(&a, &b, &mut stream(2, "abac", 0)).unwrap();
        assert_eq!(b.decrypt_attributes(&ct).unwrap(), a);
    }

    #[test]
    fn encryption_is_randomized() {
        let b = backend();
        let a = attrs(&[("trust", 50), ("role", 2)]);
        let mut rng = stream(3, "abac", 0);
        let payloads: Vec<_> = (0..20).map(|_| encrypt_attributes(&a, &b, &mut rng).unwrap().payload).collect();
        for i in 0..payloads.len() {
            for j in i + 1..payloads.len() {
                assert_ne!(payloads[i], payloads[j]);
            }
        }
    }

    #[test]
    fn encrypt_rejects_out_of_range() {
        let b = backend();
        let raw = AttributeSet::from_raw([("trust".to_string(), 150)].into_iter().collect());
        assert!(encrypt_attributes(&raw, &b, &mut stream(0, "a", 0)).is_err());
        let empty = AttributeSet::from_raw(Default::default());
        assert!(encrypt_attributes(&empty, &b, &mut stream(0, "a", 0)).is_err());
    }

    #[test]
    fn encrypted_decision_examples() {
        assert!(decide("(trust >= 45) & (role == 2)", &attrs(&[("trust", 50), ("role", ROLE_DELEGATE)])));
        assert!(!decide("clearance >= 3", &attrs(&[("clearance", 2)])));
    }

    #[test]
    fn encrypted_eval_unknown_attribute() {
        let b = backend();
        let mut rng = stream(4, "abac", 0);
        let ct = encrypt_attributes(&attrs(&[("trust", 50)]), &b, &mut rng).unwrap();
        let p = Policy::parse("role == 1").unwrap();
        assert!(eval_policy_encrypted(&p, &ct, &b, &mut rng).is_err());
    }

    #[test]
    fn ciphertext_kind_and_backend_checked() {
        let b = backend();
        let mut rng = stream(5, "abac", 0);
        let ct = encrypt_attributes(&attrs(&[("trust", 50)]), &b, &mut rng).unwrap();
        assert!(b.decrypt_decision(&ct).is_err());
        let foreign = Ciphertext {
            backend: "paillier".into(),
            payload: ct.payload.clone(),
        };
        assert!(b.decrypt_attributes(&foreign).is_err());
        assert!(build_backend("paillier", 0, AttributeSchema::default()).is_err());
    }

    // Plaintext evaluator as oracle over random policies and attribute sets.
    #[test]
    fn encrypted_path_matches_plaintext() {
        let b = backend();
        let mut rng = stream(6, "parity", 0);
        for _ in 0..1000 {
            let policy = random_policy(&mut rng, 3);
            let a = attrs(&[
                ("trust", rng.random_range(0..=100)),
                ("role", rng.random_range(0..=7)),
                ("permissions", rng.random_range(0..=255)),
                ("clearance", rng.random_range(0..=5)),
            ]);
            let ct = encrypt_attributes(&a, &b, &mut rng).unwrap();
            let enc = b.decrypt_decision(&eval_policy_encrypted(&policy, &ct, &b, &mut rng).unwrap()).unwrap();
            assert_eq!(enc, eval_policy_plain(&policy, &a).unwrap());
        }
    }

    pub(crate) fn random_policy<R: Rng>(rng: &mut R, depth: usize) -> Policy {
        if depth == 0 || rng.random_bool(0.3) {
            let (name, max) = [("trust", 100), ("role", 7), ("permissions", 255), ("clearance", 5)]
                [rng.random_range(0..4)];
            let op = [Comparison::Ge, Comparison::Gt, Comparison::Le, Comparison::Lt, Comparison::Eq, Comparison::Ne]
                [rng.random_range(0..6)];
            return Policy::leaf(name, op, rng.random_range(0..=max));
        }
        let (l, r) = (random_policy(rng, depth - 1), random_policy(rng, depth - 1));
        if rng.random_bool(0.5) {
            l.and(r)
        } else {
            l.or(r)
        }
    }

    #[test]
    fn gate_admits_by_trust() {
        let gate = AccessGate::new(Policy::parse(DEFAULT_POLICY).unwrap(), "simulated", 9).unwrap();
        let mut rng = stream(7, "gate", 0);
        assert!(gate.admit(0.5, &mut rng).unwrap());
        assert!(gate.admit(0.45, &mut rng).unwrap());
        assert!(!gate.admit(0.44, &mut rng).unwrap());
    }
}
