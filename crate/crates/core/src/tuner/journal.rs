use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use super::{Trial, TunerError};

/// Append-only JSON Lines trial log, flushed after every trial.
pub struct Journal {
    path: PathBuf,
    file: File,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> TunerError + '_ {
    move |source| TunerError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads every trial of a journal. A truncated final line (a writer killed
/// mid-append) is dropped; any other unparsable line is an error.
pub fn read_journal(path: &Path) -> Result<Vec<Trial>, TunerError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io(path)(e)),
    };
    let lines: Vec<String> = BufReader::new(file).lines().collect::<Result<_, _>>().map_err(io(path))?;
    let mut trials = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Trial>(line) {
            Ok(t) => trials.push(t),
            Err(_) if i + 1 == lines.len() => break,
            Err(e) => {
                return Err(TunerError::Journal {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    for (i, t) in trials.iter().enumerate() {
        if t.id != i as u64 {
            return Err(TunerError::Journal {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("expected trial id {i}, found {}", t.id),
            });
        }
    }
    Ok(trials)
}

impl Journal {
    /// Opens (or creates) a journal and returns the trials already in it.
    /// A truncated tail is cut off so new lines start cleanly.
    pub fn open(path: &Path) -> Result<(Journal, Vec<Trial>), TunerError> {
        let trials = read_journal(path)?;
        if path.exists() {
            let mut clean = String::new();
            for t in &trials {
                clean.push_str(&serde_json::to_string(t).expect("serializable"));
                clean.push('\n');
            }
            let current = std::fs::read_to_string(path).map_err(io(path))?;
            if current != clean {
                std::fs::write(path, clean).map_err(io(path))?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io(path))?;
        Ok((
            Journal {
                path: path.to_path_buf(),
                file,
            },
            trials,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, trial: &Trial) -> Result<(), TunerError> {
        let mut line = serde_json::to_string(trial).expect("serializable");
        line.push('\n');
        self.file.write_all(line.as_bytes()).map_err(io(&self.path))?;
        self.file.flush().map_err(io(&self.path))?;
        self.file.sync_data().map_err(io(&self.path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tuner::TrialStatus;

    fn trial(id: u64) -> Trial {
        Trial {
            id,
            params: [("x".to_string(), serde_json::Value::from(0.5))].into_iter().collect(),
            status: TrialStatus::Completed,
            objectives: Some(vec![0.25]),
            train_seconds: 0.0,
            synth_seconds: 0.0,
        }
    }

    #[test]
    fn round_trip_and_truncated_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        {
            let (mut j, prior) = Journal::open(&path).unwrap();
            assert!(prior.is_empty());
            j.append(&trial(0)).unwrap();
            j.append(&trial(1)).unwrap();
        }
        let mut text = std::fs::read_to_string(&path).unwrap();
        text.push_str("{\"id\":2,\"par");
        std::fs::write(&path, text).unwrap();
        let (mut j, prior) = Journal::open(&path).unwrap();
        assert_eq!(prior, vec![trial(0), trial(1)]);
        j.append(&trial(2)).unwrap();
        assert_eq!(read_journal(&path).unwrap().len(), 3);
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        let good = serde_json::to_string(&trial(0)).unwrap();
        std::fs::write(&path, format!("garbage\n{good}\n")).unwrap();
        assert!(matches!(read_journal(&path), Err(TunerError::Journal { line: 1, .. })));
    }
}
