//! On-disk formats.
//!
//! Compressed matrices use one binary container, all integers and doubles
//! little-endian:
//!
//! ```text
//! magic      b"HSKT"
//! version    u32   (currently 1)
//! format     u32   1 = HODLR, 2 = HBS, 3 = HBS-ID
//! n          u64
//! leaf_size  u64
//! payload    per node in breadth-first order, see below
//! ```
//!
//! A matrix is `rows: u64, cols: u64` followed by `rows * cols` doubles in
//! column-major order. A vector of doubles or of indices is `len: u64`
//! followed by its entries (indices as u64). Per node the payload holds
//!
//! * HODLR: `u`, `s`, `v`, `d`
//! * HBS: `u`, `v`, `b`, `d`, `y`, `z`, and after the last node `sample_rank: u64`
//! * HBS-ID: `u`, `v`, `b`, `d`, `skeleton_in`, `skeleton_out`
//!
//! The tree is rebuilt from `(n, leaf_size)`. Nothing follows the payload.
//!
//! Dense matrices are stored either as `rows: u64, cols: u64` plus
//! column-major doubles, or, for files ending in `.txt`, as whitespace
//! separated text with one matrix row per line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compressed::{Compressed, Format};
use crate::hbs::{HbsIdMatrix, HbsMatrix};
use crate::hodlr::HodlrMatrix;
use crate::linalg::DenseMatrix;
use crate::tree::IndexTree;
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"HSKT";
pub const VERSION: u32 = 1;

fn format_tag(f: Format) -> u32 {
    match f {
        Format::Hodlr => 1,
        Format::Hbs => 2,
        Format::HbsId => 3,
    }
}

fn tag_format(tag: u32) -> Result<Format> {
    match tag {
        1 => Ok(Format::Hodlr),
        2 => Ok(Format::Hbs),
        3 => Ok(Format::HbsId),
        t => Err(Error::Format(format!("unknown format tag {t}"))),
    }
}

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64s(&mut self, v: &[f64]) {
        self.buf.reserve(8 * v.len());
        for x in v {
            self.buf.extend_from_slice(&x.to_le_bytes());
        }
    }

    fn matrix(&mut self, m: &DenseMatrix) {
        self.u64(m.nrows() as u64);
        self.u64(m.ncols() as u64);
        self.f64s(m.as_slice());
    }

    fn vector(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        self.f64s(v);
    }

    fn indices(&mut self, v: &[usize]) {
        self.u64(v.len() as u64);
        for &i in v {
            self.u64(i as u64);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format(format!("unexpected end of data at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| Error::Format(format!("length {v} does not fit in memory")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("length overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn matrix(&mut self) -> Result<DenseMatrix> {
        let rows = self.len()?;
        let cols = self.len()?;
        let n = rows.checked_mul(cols).ok_or_else(|| Error::Format("matrix size overflow".into()))?;
        Ok(DenseMatrix::from_vec(rows, cols, self.f64s(n)?))
    }

    fn vector(&mut self) -> Result<Vec<f64>> {
        let n = self.len()?;
        self.f64s(n)
    }

    fn indices(&mut self) -> Result<Vec<usize>> {
        let n = self.len()?;
        if n > (self.buf.len() - self.pos) / 8 {
            return Err(Error::Format(format!("unexpected end of data at byte {}", self.pos)));
        }
        (0..n).map(|_| self.len()).collect()
    }

    fn finish(self) -> Result<()> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(Error::Format(format!("{} trailing bytes", self.buf.len() - self.pos)))
        }
    }
}

/// Header fields of a compressed-matrix container.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub version: u32,
    pub format: u32,
    pub n: u64,
    pub leaf_size: u64,
}

fn read_header(r: &mut Reader) -> Result<Header> {
    if r.take(4)? != MAGIC {
        return Err(Error::Format("not a compressed matrix file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    Ok(Header {
        version,
        format: r.u32()?,
        n: r.u64()?,
        leaf_size: r.u64()?,
    })
}

fn write_payload(w: &mut Writer, c: &Compressed) {
    let count = c.tree().node_count();
    match c {
        Compressed::Hodlr(h) => {
            for id in 0..count {
                w.matrix(h.u(id));
                w.vector(h.s(id));
                w.matrix(h.v(id));
                w.matrix(h.diagonal(id));
            }
        }
        Compressed::Hbs(h) => {
            for id in 0..count {
                w.matrix(h.u(id));
                w.matrix(h.v(id));
                w.matrix(h.b(id));
                w.matrix(h.diagonal(id));
                w.vector(h.y(id));
                w.vector(h.z(id));
            }
            w.u64(h.sample_rank() as u64);
        }
        Compressed::HbsId(h) => {
            for id in 0..count {
                w.matrix(h.u(id));
                w.matrix(h.v(id));
                w.matrix(h.b(id));
                w.matrix(h.diagonal(id));
                w.indices(h.skeleton_in(id));
                w.indices(h.skeleton_out(id));
            }
        }
    }
}

fn read_payload(r: &mut Reader, format: Format, tree: IndexTree) -> Result<Compressed> {
    let count = tree.node_count();
    Ok(match format {
        Format::Hodlr => {
            let (mut u, mut s, mut v, mut d) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for _ in 0..count {
                u.push(r.matrix()?);
                s.push(r.vector()?);
                v.push(r.matrix()?);
                d.push(r.matrix()?);
            }
            Compressed::Hodlr(HodlrMatrix::from_parts(tree, u, s, v, d)?)
        }
        Format::Hbs => {
            let (mut u, mut v, mut b, mut d, mut y, mut z) =
                (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for _ in 0..count {
                u.push(r.matrix()?);
                v.push(r.matrix()?);
                b.push(r.matrix()?);
                d.push(r.matrix()?);
                y.push(r.vector()?);
                z.push(r.vector()?);
            }
            let rank = r.len()?;
            Compressed::Hbs(HbsMatrix::from_parts(tree, u, v, b, d, y, z, rank)?)
        }
        Format::HbsId => {
            let (mut u, mut v, mut b, mut d, mut si, mut so) =
                (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for _ in 0..count {
                u.push(r.matrix()?);
                v.push(r.matrix()?);
                b.push(r.matrix()?);
                d.push(r.matrix()?);
                si.push(r.indices()?);
                so.push(r.indices()?);
            }
            Compressed::HbsId(HbsIdMatrix::from_parts(tree, u, v, b, d, si, so)?)
        }
    })
}

fn header_of(c: &Compressed) -> Header {
    Header {
        version: VERSION,
        format: format_tag(c.format()),
        n: c.dim() as u64,
        leaf_size: c.tree().leaf_size() as u64,
    }
}

fn tree_for(h: &Header) -> Result<IndexTree> {
    let n = usize::try_from(h.n).map_err(|_| Error::Format("dimension too large".into()))?;
    let m = usize::try_from(h.leaf_size).map_err(|_| Error::Format("leaf size too large".into()))?;
    IndexTree::build(n, m).map_err(|e| Error::Format(format!("bad tree parameters: {e}")))
}

/// Serializes `c` into the binary container.
pub fn to_bytes(c: &Compressed) -> Vec<u8> {
    let h = header_of(c);
    let mut w = Writer::default();
    w.buf.extend_from_slice(&MAGIC);
    w.u32(h.version);
    w.u32(h.format);
    w.u64(h.n);
    w.u64(h.leaf_size);
    write_payload(&mut w, c);
    w.buf
}

pub fn from_bytes(bytes: &[u8]) -> Result<Compressed> {
    let mut r = Reader::new(bytes);
    let h = read_header(&mut r)?;
    let format = tag_format(h.format)?;
    let c = read_payload(&mut r, format, tree_for(&h)?)?;
    r.finish()?;
    Ok(c)
}

/// Reads only the header of a container.
pub fn peek_header(bytes: &[u8]) -> Result<Header> {
    read_header(&mut Reader::new(bytes))
}

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| crate::error::invalid(format!("'{}' is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

pub fn save(path: impl AsRef<Path>, c: &Compressed) -> Result<()> {
    write_atomic(path, &to_bytes(c))
}

pub fn load(path: impl AsRef<Path>) -> Result<Compressed> {
    from_bytes(&fs::read(path)?)
}

/// Manifest of the JSON sidecar variant: the header in readable form plus
/// per-node shapes, with the payload in a separate raw blob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_name: String,
    #[serde(flatten)]
    pub header: Header,
    pub blob: String,
    pub blob_bytes: u64,
    pub nodes: Vec<NodeManifest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeManifest {
    pub id: usize,
    pub start: usize,
    pub end: usize,
    pub level: usize,
    pub leaf: bool,
    pub row_rank: usize,
    pub col_rank: usize,
}

fn ranks(c: &Compressed, id: usize) -> (usize, usize) {
    if id == c.tree().root() {
        return (0, 0);
    }
    match c {
        Compressed::Hodlr(h) => (h.u(id).ncols(), h.s(id).len()),
        Compressed::Hbs(h) => (h.u(id).ncols(), h.v(id).ncols()),
        Compressed::HbsId(h) => (h.u(id).ncols(), h.v(id).ncols()),
    }
}

/// Writes `<path>` as a JSON manifest and `<path>.bin` as the raw payload
/// (the container without its header).
pub fn save_sidecar(path: impl AsRef<Path>, c: &Compressed) -> Result<()> {
    let path = path.as_ref();
    let blob_path = PathBuf::from(format!("{}.bin", path.display()));
    let mut w = Writer::default();
    write_payload(&mut w, c);
    let tree = c.tree();
    let manifest = Manifest {
        format_name: c.format().name().to_string(),
        header: header_of(c),
        blob: blob_path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        blob_bytes: w.buf.len() as u64,
        nodes: (0..tree.node_count())
            .map(|id| {
                let nd = tree.node(id);
                let (row_rank, col_rank) = ranks(c, id);
                NodeManifest {
                    id,
                    start: nd.start,
                    end: nd.end,
                    level: nd.level,
                    leaf: nd.is_leaf(),
                    row_rank,
                    col_rank,
                }
            })
            .collect(),
    };
    write_atomic(&blob_path, &w.buf)?;
    let json = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    write_atomic(path, &json)
}

pub fn load_sidecar(path: impl AsRef<Path>) -> Result<Compressed> {
    let path = path.as_ref();
    let manifest: Manifest =
        serde_json::from_slice(&fs::read(path)?).map_err(|e| Error::Format(e.to_string()))?;
    if manifest.header.version != VERSION {
        return Err(Error::Format(format!("unsupported version {}", manifest.header.version)));
    }
    let format = tag_format(manifest.header.format)?;
    let blob_path = path.parent().unwrap_or(Path::new(".")).join(&manifest.blob);
    let blob = fs::read(blob_path)?;
    if blob.len() as u64 != manifest.blob_bytes {
        return Err(Error::Format("blob size does not match the manifest".into()));
    }
    let mut r = Reader::new(&blob);
    let c = read_payload(&mut r, format, tree_for(&manifest.header)?)?;
    r.finish()?;
    Ok(c)
}

fn is_text(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("txt"))
}

pub fn dense_to_bytes(a: &DenseMatrix) -> Vec<u8> {
    let mut w = Writer::default();
    w.matrix(a);
    w.buf
}

pub fn dense_from_bytes(bytes: &[u8]) -> Result<DenseMatrix> {
    let mut r = Reader::new(bytes);
    let a = r.matrix()?;
    r.finish()?;
    Ok(a)
}

/// One row per line, entries separated by whitespace, printed with enough
/// digits to read back bit-exactly.
pub fn dense_to_text(a: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..a.nrows() {
        let row: Vec<String> = (0..a.ncols()).map(|j| format!("{:e}", a[(i, j)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn dense_from_text(text: &str) -> Result<DenseMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Format(format!(
                    "line {}: expected {} entries, found {}",
                    lineno + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    Ok(DenseMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Reads a dense matrix, as text when the file name ends in `.txt`.
pub fn load_dense(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    if is_text(path) {
        dense_from_text(&fs::read_to_string(path)?)
    } else {
        dense_from_bytes(&fs::read(path)?)
    }
}

pub fn save_dense(path: impl AsRef<Path>, a: &DenseMatrix) -> Result<()> {
    let path = path.as_ref();
    if is_text(path) {
        write_atomic(path, dense_to_text(a).as_bytes())
    } else {
        write_atomic(path, &dense_to_bytes(a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compressed::{compress, CompressParams};
    use crate::linalg::GaussianRng;
    use crate::operator::{dense_oracle, planted::planted_hbs};

    fn sample(format: Format) -> Compressed {
        let a = planted_hbs(96, 12, 3, 4).unwrap();
        let tree = IndexTree::build(96, 12).unwrap();
        let p = CompressParams {
            sample_width: 8,
            eps: 1e-10,
            seed: 9,
        };
        compress(&dense_oracle(a).unwrap(), &tree, format, p).unwrap()
    }

    #[test]
    fn container_round_trip_all_formats() {
        for f in Format::ALL {
            let c = sample(f);
            let bytes = to_bytes(&c);
            assert_eq!(&bytes[..4], b"HSKT");
            assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), format_tag(f));
            let back = from_bytes(&bytes).unwrap();
            assert_eq!(back, c);
            assert_eq!(to_bytes(&back), bytes);
        }
    }

    #[test]
    fn header_layout() {
        let c = sample(Format::Hodlr);
        let h = peek_header(&to_bytes(&c)).unwrap();
        assert_eq!(
            h,
            Header {
                version: 1,
                format: 1,
                n: 96,
                leaf_size: 12
            }
        );
    }

    #[test]
    fn rejects_damaged_containers() {
        let bytes = to_bytes(&sample(Format::HbsId));
        assert!(matches!(from_bytes(&bytes[..bytes.len() - 3]), Err(Error::Format(_))));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(from_bytes(&extra), Err(Error::Format(_))));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(from_bytes(&bad), Err(Error::Format(_))));
        let mut bad = bytes;
        bad[8] = 9;
        assert!(matches!(from_bytes(&bad), Err(Error::Format(_))));
        assert!(from_bytes(&[]).is_err());
    }

    #[test]
    fn sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for f in Format::ALL {
            let c = sample(f);
            let path = dir.path().join(format!("{f}.json"));
            save_sidecar(&path, &c).unwrap();
            let manifest: Manifest = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
            assert_eq!(manifest.format_name, f.name());
            assert_eq!(manifest.nodes.len(), c.tree().node_count());
            assert_eq!(load_sidecar(&path).unwrap(), c);
        }
    }

    #[test]
    fn dense_files_round_trip() {
        let a = GaussianRng::new(2).block(5, 3);
        let dir = tempfile::tempdir().unwrap();
        for name in ["a.bin", "a.txt"] {
            let path = dir.path().join(name);
            save_dense(&path, &a).unwrap();
            assert_eq!(load_dense(&path).unwrap(), a);
        }
        let bytes = fs::read(dir.path().join("a.bin")).unwrap();
        assert_eq!(bytes.len(), 16 + 8 * 15);
        assert_eq!(u64::from_le_bytes(bytes[..8].try_into().unwrap()), 5);
        assert_eq!(f64::from_le_bytes(bytes[16..24].try_into().unwrap()), a[(0, 0)]);
        assert_eq!(f64::from_le_bytes(bytes[24..32].try_into().unwrap()), a[(1, 0)]);
    }

    #[test]
    fn text_parse_errors() {
        assert_eq!(dense_from_text("1 2\n3 4\n").unwrap(), DenseMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        assert!(dense_from_text("1 2\n3\n").is_err());
        assert!(dense_from_text("1 x\n").is_err());
    }

    #[test]
    fn atomic_write_leaves_no_temp_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.bin");
        write_atomic(&path, b"abc").unwrap();
        write_atomic(&path, b"de").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"de");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
