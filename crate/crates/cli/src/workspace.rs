//! On-disk workspace: parameters and mock-IDP/contract keys, one file per
//! participant, the store snapshot and meeting transcripts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chsc_core::chameleon::KeyPair;
use chsc_core::group::{setup, Profile};
use chsc_core::identity::Ed25519Issuer;
use chsc_core::ledger::Store;
use chsc_core::protocols::world::{Participant, World};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const FORMAT_VERSION: u32 = 1;
const CONFIG_FILE: &str = "workspace.json";
const STORE_FILE: &str = "ledger.snap";
const PARTICIPANTS_DIR: &str = "participants";
const TRANSCRIPTS_DIR: &str = "transcripts";

#[derive(Serialize, Deserialize)]
pub struct Config {
    pub version: u32,
    pub profile: String,
    pub security_bits: u32,
    #[serde(with = "hex::serde")]
    pub idp_seed: [u8; 32],
    pub next_serial: u64,
    pub contract: KeyPair,
    #[serde(default)]
    pub meetings: u64,
}

#[derive(Serialize, Deserialize)]
struct ParticipantFile {
    version: u32,
    participant: Participant,
}

pub struct Workspace {
    pub root: PathBuf,
    pub config: Config,
    pub world: World,
    pub participants: BTreeMap<String, Participant>,
}

fn io(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Storage(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n").map_err(|e| io(path, e))
}

fn check_version(found: u32, path: &Path) -> Result<(), CliError> {
    if found != FORMAT_VERSION {
        return Err(CliError::Storage(format!(
            "{}: unsupported format version {found}",
            path.display()
        )));
    }
    Ok(())
}

/// Participant names become file names.
pub fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.len() <= 64 && name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

impl Workspace {
    pub fn exists(root: &Path) -> bool {
        root.join(CONFIG_FILE).exists()
    }

    pub fn create(root: &Path, config: Config) -> Result<Self, CliError> {
        for dir in [root.to_path_buf(), root.join(PARTICIPANTS_DIR), root.join(TRANSCRIPTS_DIR)] {
            fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
        }
        let ws = Self::assemble(root, config, Store::new(), BTreeMap::new())?;
        ws.save()?;
        Ok(ws)
    }

    fn assemble(
        root: &Path,
        config: Config,
        store: Store,
        participants: BTreeMap<String, Participant>,
    ) -> Result<Self, CliError> {
        Profile::from_name(&config.profile).map_err(|e| CliError::Storage(e.to_string()))?;
        let params = setup(config.security_bits).map_err(|e| CliError::Storage(e.to_string()))?;
        let world = World::from_parts(
            params,
            Ed25519Issuer::from_seed(&config.idp_seed),
            config.next_serial,
            config.contract.clone(),
            store,
        );
        Ok(Workspace {
            root: root.to_path_buf(),
            config,
            world,
            participants,
        })
    }

    pub fn open(root: &Path, profile: &str) -> Result<Self, CliError> {
        let cfg_path = root.join(CONFIG_FILE);
        if !cfg_path.exists() {
            return Err(CliError::Usage(format!(
                "no workspace at {} (run `chsc setup` first)",
                root.display()
            )));
        }
        let config: Config = read_json(&cfg_path)?;
        check_version(config.version, &cfg_path)?;
        let wanted = Profile::from_name(profile).map_err(|e| CliError::Usage(e.to_string()))?;
        let have = Profile::from_name(&config.profile).map_err(|e| CliError::Storage(e.to_string()))?;
        if wanted != have {
            return Err(CliError::Usage(format!(
                "workspace uses profile {}, not {}",
                config.profile, profile
            )));
        }

        let store_path = root.join(STORE_FILE);
        let store = Store::restore(&store_path).map_err(|e| match e {
            chsc_core::ledger::StoreError::Io(m) => CliError::Io(m),
            other => CliError::Storage(other.to_string()),
        })?;

        let mut participants = BTreeMap::new();
        let dir = root.join(PARTICIPANTS_DIR);
        let entries = fs::read_dir(&dir).map_err(|e| io(&dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| io(&dir, e))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let file: ParticipantFile = read_json(&path)?;
            check_version(file.version, &path)?;
            participants.insert(file.participant.name.clone(), file.participant);
        }
        Self::assemble(root, config, store, participants)
    }

    pub fn save(&self) -> Result<(), CliError> {
        let mut config = Config {
            next_serial: self.world.idp.next_serial(),
            contract: self.config.contract.clone(),
            profile: self.config.profile.clone(),
            ..self.config
        };
        config.version = FORMAT_VERSION;
        write_json(&self.root.join(CONFIG_FILE), &config)?;
        for p in self.participants.values() {
            let path = self.root.join(PARTICIPANTS_DIR).join(format!("{}.json", p.name));
            write_json(
                &path,
                &ParticipantFile {
                    version: FORMAT_VERSION,
                    participant: p.clone(),
                },
            )?;
        }
        let store_path = self.root.join(STORE_FILE);
        self.world.env.store.read().persist(&store_path).map_err(|e| match e {
            chsc_core::ledger::StoreError::Io(m) => CliError::Io(m),
            other => CliError::Storage(other.to_string()),
        })
    }

    pub fn write_transcript(&self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let dir = self.root.join(TRANSCRIPTS_DIR);
        fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| io(&path, e))?;
        Ok(path)
    }

    /// Ledger length, used to vary seeded randomness with workspace state.
    pub fn state_counter(&self) -> u64 {
        self.world.env.store.read().ledger.len() as u64 + self.config.meetings
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_file_safe() {
        assert!(valid_name("alice_2-b"));
        assert!(!valid_name(""));
        assert!(!valid_name("../x"));
        assert!(!valid_name(&"a".repeat(65)));
    }
}
