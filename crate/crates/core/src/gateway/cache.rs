use std::io::Write;
use std::path::{Path, PathBuf};

use tokio::sync::Mutex;

use super::{GatewayError, Transcript};

/// Directory of transcripts, one JSON file per digest:
/// `<digest>.json`, or `<digest>.<variant>.json` for renewed requests.
///
/// Reads are lock-free; writes go through a temp file and a rename, one at
/// a time.
#[derive(Debug)]
pub struct TranscriptCache {
    dir: PathBuf,
    writer: Mutex<()>,
}

impl TranscriptCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|source| GatewayError::Cache {
            path: dir.clone(),
            source,
        })?;
        Ok(TranscriptCache { dir, writer: Mutex::new(()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, digest: &str, variant: u32) -> PathBuf {
        if variant == 0 {
            self.dir.join(format!("{digest}.json"))
        } else {
            self.dir.join(format!("{digest}.{variant}.json"))
        }
    }

    /// A stored transcript, if present and intact. Damaged entries are
    /// ignored (and later overwritten).
    pub fn get(&self, digest: &str, variant: u32) -> Option<Transcript> {
        let path = self.path_for(digest, variant);
        let raw = std::fs::read_to_string(&path).ok()?;
        match serde_json::from_str::<Transcript>(&raw) {
            Ok(t) if t.prompt_digest == digest && t.digest_matches() => Some(t),
            _ => {
                tracing::warn!(path = %path.display(), "ignoring damaged cache entry");
                None
            }
        }
    }

    pub async fn put(&self, transcript: &Transcript, variant: u32) -> Result<(), GatewayError> {
        let path = self.path_for(&transcript.prompt_digest, variant);
        let mut body = serde_json::to_string_pretty(transcript).expect("transcript serializes");
        body.push('\n');

        let _guard = self.writer.lock().await;
        let io = |source| GatewayError::Cache { path: path.clone(), source };
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(io)?;
        tmp.write_all(body.as_bytes()).map_err(io)?;
        tmp.persist(&path).map_err(|e| io(e.error))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::prompt_digest;

    fn transcript(prompt: &str) -> Transcript {
        Transcript {
            model: "m".into(),
            prompt: prompt.into(),
            response: "r".into(),
            prompt_digest: prompt_digest("m", prompt),
            timestamp: "1970-01-01T00:00:00Z".into(),
        }
    }

    #[tokio::test]
    async fn write_then_read_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let cache = TranscriptCache::open(dir.path()).unwrap();
        let t = transcript("p");
        assert_eq!(cache.get(&t.prompt_digest, 0), None);
        cache.put(&t, 0).await.unwrap();
        assert_eq!(cache.get(&t.prompt_digest, 0), Some(t.clone()));
        assert_eq!(cache.get(&t.prompt_digest, 1), None);
        assert!(cache.path_for(&t.prompt_digest, 1).ends_with(format!("{}.1.json", t.prompt_digest)));
    }

    #[tokio::test]
    async fn tampered_entry_is_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        let cache = TranscriptCache::open(dir.path()).unwrap();
        let mut t = transcript("p");
        let digest = t.prompt_digest.clone();
        t.prompt = "autre".into();
        cache.put(&t, 0).await.unwrap();
        assert_eq!(cache.get(&digest, 0), None);
        std::fs::write(cache.path_for(&digest, 0), "{not json").unwrap();
        assert_eq!(cache.get(&digest, 0), None);
    }
}
