//! Dataset manifest: `path,utterance_id,speaker_id,session_id,label`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMeta, FeatureTable};

pub const MANIFEST_HEADER: [&str; 5] = ["path", "utterance_id", "speaker_id", "session_id", "label"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub utterance_id: String,
    pub speaker_id: String,
    pub session_id: String,
    pub label: String,
}

impl ManifestEntry {
    pub fn meta(&self) -> FeatureMeta {
        FeatureMeta {
            utterance_id: self.utterance_id.clone(),
            segment_index: None,
            speaker_id: self.speaker_id.clone(),
            session_id: self.session_id.clone(),
            label: self.label.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Reads a manifest; relative paths resolve against its directory.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        Self::from_reader(file, base)
    }

    pub fn from_reader(reader: impl std::io::Read, base: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::parse("manifest header", e))?
            .iter()
            .map(str::to_string)
            .collect();
        if header != MANIFEST_HEADER {
            return Err(Error::parse(
                "manifest header",
                format!("expected {}, got {}", MANIFEST_HEADER.join(","), header.join(",")),
            ));
        }
        let mut entries: Vec<ManifestEntry> = Vec::new();
        let mut seen = HashMap::new();
        for (line, rec) in rdr.deserialize::<ManifestEntry>().enumerate() {
            let mut e = rec.map_err(|err| Error::parse("manifest row", err))?;
            if e.utterance_id.is_empty() {
                return Err(Error::parse("manifest row", format!("row {} has no utterance_id", line + 1)));
            }
            if seen.insert(e.utterance_id.clone(), line).is_some() {
                return Err(Error::parse(
                    "manifest row",
                    format!("duplicate utterance_id '{}'", e.utterance_id),
                ));
            }
            if e.path.is_relative() {
                e.path = base.join(&e.path);
            }
            entries.push(e);
        }
        Ok(Manifest { entries })
    }

    pub fn write(&self, out: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(MANIFEST_HEADER)
            .map_err(|e| Error::parse("manifest output", e))?;
        for e in &self.entries {
            w.write_record([
                e.path.to_string_lossy().as_ref(),
                &e.utterance_id,
                &e.speaker_id,
                &e.session_id,
                &e.label,
            ])
            .map_err(|e| Error::parse("manifest output", e))?;
        }
        w.flush().map_err(|e| Error::io("<manifest output>", e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, utterance_id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.utterance_id == utterance_id)
    }

    /// Replaces speaker, session and label of every row with the manifest's.
    /// Rows whose utterance is not listed produce a join error naming them.
    pub fn annotate(&self, table: &mut FeatureTable) -> Result<()> {
        let index: HashMap<&str, &ManifestEntry> =
            self.entries.iter().map(|e| (e.utterance_id.as_str(), e)).collect();
        let mut missing = Vec::new();
        for row in &mut table.rows {
            match index.get(row.meta.utterance_id.as_str()) {
                Some(e) => {
                    row.meta.speaker_id = e.speaker_id.clone();
                    row.meta.session_id = e.session_id.clone();
                    row.meta.label = e.label.clone();
                }
                None => missing.push(row.meta.utterance_id.clone()),
            }
        }
        if missing.is_empty() {
            Ok(())
        } else {
            missing.dedup();
            Err(Error::Join { missing })
        }
    }
}
