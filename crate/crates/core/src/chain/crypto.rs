use ed25519_dalek::{Signature, Signer as _, SigningKey, Verifier as _, VerifyingKey};
use rand::rngs::OsRng;
use serde::{Deserialize, Serialize};

/// Verification half of a signature scheme.
pub trait SignatureScheme: Send + Sync {
    fn name(&self) -> &'static str;
    /// Keys and signatures are lowercase hex.
    fn verify(&self, public_key: &str, message: &[u8], signature: &str) -> bool;
}

/// Signing half: an actor holding a private key.
pub trait Signer: Send + Sync {
    fn actor(&self) -> &str;
    fn public_key(&self) -> String;
    fn sign(&self, message: &[u8]) -> String;
}

/// Deterministic Ed25519 (RFC 8032).
#[derive(Debug, Clone, Copy, Default)]
pub struct Ed25519;

impl SignatureScheme for Ed25519 {
    fn name(&self) -> &'static str {
        "ed25519"
    }

    fn verify(&self, public_key: &str, message: &[u8], signature: &str) -> bool {
        let Ok(pk) = hex::decode(public_key) else { return false };
        let Ok(pk) = <[u8; 32]>::try_from(pk.as_slice()) else { return false };
        let Ok(key) = VerifyingKey::from_bytes(&pk) else { return false };
        let Ok(sig) = hex::decode(signature) else { return false };
        let Ok(sig) = Signature::from_slice(&sig) else { return false };
        key.verify(message, &sig).is_ok()
    }
}

#[derive(Clone)]
pub struct Identity {
    actor: String,
    key: SigningKey,
}

impl std::fmt::Debug for Identity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Identity").field("actor", &self.actor).field("public_key", &self.public_key()).finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KeyFileError {
    #[error("key file is not valid JSON: {0}")]
    Json(String),
    #[error("secret_key must be 32 bytes of hex")]
    BadSecret,
}

#[derive(Serialize, Deserialize)]
struct KeyFile {
    actor: String,
    secret_key: String,
}

impl Identity {
    pub fn from_seed(actor: impl Into<String>, seed: [u8; 32]) -> Self {
        Identity { actor: actor.into(), key: SigningKey::from_bytes(&seed) }
    }

    pub fn generate(actor: impl Into<String>) -> Self {
        Identity { actor: actor.into(), key: SigningKey::generate(&mut OsRng) }
    }

    pub fn to_key_file(&self) -> String {
        let file = KeyFile { actor: self.actor.clone(), secret_key: hex::encode(self.key.to_bytes()) };
        serde_json::to_string_pretty(&file).expect("key file serializes")
    }

    pub fn from_key_file(text: &str) -> Result<Self, KeyFileError> {
        let file: KeyFile = serde_json::from_str(text).map_err(|e| KeyFileError::Json(e.to_string()))?;
        let secret = hex::decode(file.secret_key.trim()).map_err(|_| KeyFileError::BadSecret)?;
        let seed = <[u8; 32]>::try_from(secret.as_slice()).map_err(|_| KeyFileError::BadSecret)?;
        Ok(Identity::from_seed(file.actor, seed))
    }
}

impl Signer for Identity {
    fn actor(&self) -> &str {
        &self.actor
    }

    fn public_key(&self) -> String {
        hex::encode(self.key.verifying_key().to_bytes())
    }

    fn sign(&self, message: &[u8]) -> String {
        hex::encode(self.key.sign(message).to_bytes())
    }
}
