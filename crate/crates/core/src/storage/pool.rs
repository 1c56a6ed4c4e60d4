//! Counting buffer pool: strict-LRU page cache with sequential/random
//! miss classification.
//!
//! Classification: a miss is sequential when its page index equals the
//! column's previously fetched index or that plus one (same-page re-fetch
//! counts as sequential streaming); the very first fetch of a column is
//! sequential only for page 0. Everything else is random. Hits never touch
//! disk and are counted separately, so per column
//! `hits + seq + rand == fetch_page calls`.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{Read, Seek, SeekFrom};
use std::sync::{Arc, Mutex};

use super::catalog::ColumnMeta;
use super::page::{PageHeader, PAGE_SIZE};
use crate::{EngineError, Result};

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct FetchCounters {
    pub seq: u64,
    pub rand: u64,
    pub hits: u64,
    pub evictions: u64,
}

impl FetchCounters {
    pub fn misses(&self) -> u64 {
        self.seq + self.rand
    }

    pub fn add(&mut self, other: &FetchCounters) {
        self.seq += other.seq;
        self.rand += other.rand;
        self.hits += other.hits;
        self.evictions += other.evictions;
    }
}

type ColKey = (u32, u32);
type PageKey = (u32, u32, u64);

struct Frame {
    data: Arc<Vec<u8>>,
    tick: u64,
}

#[derive(Default)]
struct PoolInner {
    frames: HashMap<PageKey, Frame>,
    lru: BTreeMap<u64, PageKey>,
    tick: u64,
    last_fetched: HashMap<ColKey, u64>,
    counters: HashMap<ColKey, FetchCounters>,
    files: HashMap<ColKey, File>,
}

impl PoolInner {
    fn touch(&mut self, key: PageKey) {
        if let Some(f) = self.frames.get_mut(&key) {
            self.lru.remove(&f.tick);
            self.tick += 1;
            f.tick = self.tick;
            self.lru.insert(self.tick, key);
        }
    }
}

pub struct BufferPool {
    capacity: usize,
    inner: Mutex<PoolInner>,
}

impl BufferPool {
    pub fn new(capacity_pages: usize) -> BufferPool {
        assert!(capacity_pages >= 1, "pool needs at least one page");
        BufferPool {
            capacity: capacity_pages,
            inner: Mutex::new(PoolInner::default()),
        }
    }

    pub fn capacity_pages(&self) -> usize {
        self.capacity
    }

    /// Drop every frame and all counters (cold start).
    pub fn reset(&self) {
        let mut g = self.inner.lock().unwrap();
        g.frames.clear();
        g.lru.clear();
        g.last_fetched.clear();
        g.counters.clear();
        g.tick = 0;
    }

    pub fn fetch_page(&self, col: &ColumnMeta, page_index: u64) -> Result<Arc<Vec<u8>>> {
        debug_assert!(page_index < col.page_count(), "page index past end");
        let col_key = (col.table_id, col.column_id);
        let page_key = (col.table_id, col.column_id, page_index);
        let mut g = self.inner.lock().unwrap();

        if g.frames.contains_key(&page_key) {
            g.counters.entry(col_key).or_default().hits += 1;
            g.last_fetched.insert(col_key, page_index);
            g.touch(page_key);
            return Ok(g.frames[&page_key].data.clone());
        }

        let seq = match g.last_fetched.get(&col_key) {
            Some(&last) => page_index == last || page_index == last + 1,
            None => page_index == 0,
        };
        {
            let c = g.counters.entry(col_key).or_default();
            if seq {
                c.seq += 1;
            } else {
                c.rand += 1;
            }
        }
        g.last_fetched.insert(col_key, page_index);

        if !g.files.contains_key(&col_key) {
            let f = File::open(&col.path).map_err(|e| EngineError::io(&col.path, e))?;
            g.files.insert(col_key, f);
        }
        let mut buf = vec![0u8; PAGE_SIZE];
        {
            let f = g.files.get(&col_key).unwrap();
            (&*f)
                .seek(SeekFrom::Start(page_index * PAGE_SIZE as u64))
                .map_err(|e| EngineError::io(&col.path, e))?;
            (&*f)
                .read_exact(&mut buf)
                .map_err(|e| EngineError::io(&col.path, e))?;
        }
        let h = PageHeader::decode(&buf, &col.qualified())?;
        let expect_first = page_index * col.rows_per_page();
        if h.table_id != col.table_id || h.column_id != col.column_id || h.first_row != expect_first
        {
            return Err(EngineError::Catalog(format!(
                "{}: page {page_index} header {:?} does not match catalog ids ({}, {}) / first_row {expect_first}",
                col.qualified(),
                (h.table_id, h.column_id, h.first_row),
                col.table_id,
                col.column_id
            )));
        }

        while g.frames.len() >= self.capacity {
            let (&tick, &victim) = g.lru.iter().next().unwrap();
            g.lru.remove(&tick);
            g.frames.remove(&victim);
            g.counters.entry((victim.0, victim.1)).or_default().evictions += 1;
        }

        let data = Arc::new(buf);
        g.tick += 1;
        let tick = g.tick;
        g.frames.insert(
            page_key,
            Frame {
                data: data.clone(),
                tick,
            },
        );
        g.lru.insert(tick, page_key);
        Ok(data)
    }

    /// Counters for one column, zero if it was never fetched.
    pub fn column_counters(&self, table_id: u32, column_id: u32) -> FetchCounters {
        let g = self.inner.lock().unwrap();
        g.counters
            .get(&(table_id, column_id))
            .copied()
            .unwrap_or_default()
    }

    pub fn total_counters(&self) -> FetchCounters {
        let g = self.inner.lock().unwrap();
        let mut total = FetchCounters::default();
        for c in g.counters.values() {
            total.add(c);
        }
        total
    }

    /// Full per-column counter snapshot, keyed by (table_id, column_id).
    pub fn snapshot(&self) -> HashMap<(u32, u32), FetchCounters> {
        self.inner.lock().unwrap().counters.clone()
    }
}
