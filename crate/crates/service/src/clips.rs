use std::sync::{Arc, Mutex};

use indexmap::IndexMap;

/// Bounded in-memory store of synthesized WAV files with LRU eviction.
pub struct ClipStore {
    capacity: usize,
    clips: Mutex<IndexMap<String, Arc<Vec<u8>>>>,
}

impl ClipStore {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            clips: Mutex::new(IndexMap::new()),
        }
    }

    pub fn insert(&self, key: String, wav: Vec<u8>) {
        let mut clips = self.clips.lock().expect("clip store lock");
        clips.shift_remove(&key);
        clips.insert(key, Arc::new(wav));
        while clips.len() > self.capacity {
            clips.shift_remove_index(0);
        }
    }

    /// Fetching marks the clip as most recently used.
    pub fn get(&self, key: &str) -> Option<Arc<Vec<u8>>> {
        let mut clips = self.clips.lock().expect("clip store lock");
        let index = clips.get_index_of(key)?;
        let last = clips.len() - 1;
        clips.move_index(index, last);
        clips.get_index(last).map(|(_, v)| v.clone())
    }

    pub fn len(&self) -> usize {
        self.clips.lock().expect("clip store lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }
}
