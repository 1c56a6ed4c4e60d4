//! On-disk columnar storage: fixed-size pages, a tab-separated catalog
//! descriptor, a counting LRU buffer pool, and column readers.

mod catalog;
mod page;
mod pool;
mod reader;
mod writer;

pub use catalog::{open_catalog, Catalog, ColumnMeta, TableMeta, CATALOG_FILE};
pub use page::{page_count, page_of, rows_per_page, PageHeader, PAGE_HEADER_LEN, PAGE_MAGIC, PAGE_SIZE};
pub use pool::{BufferPool, FetchCounters};
pub use reader::{decode_value, read_at_positions, ColumnScan};
pub use writer::{ColumnVals, DatasetWriter};
