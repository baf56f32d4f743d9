//! Flat parameter storage with a named-segment layout, plus the `.pvec`
//! checkpoint format.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};

/// One named, contiguous slice of the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// Ordered, gap-free cover of `[0, total_len)` by named segments.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SegmentMap {
    segments: Vec<Segment>,
    total: usize,
}

impl SegmentMap {
    pub fn builder() -> SegmentMapBuilder {
        SegmentMapBuilder { segments: Vec::new(), cursor: 0 }
    }

    pub fn total_len(&self) -> usize {
        self.total
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn get(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }

    /// Names of all segments whose name starts with `prefix`.
    pub fn names_with_prefix(&self, prefix: &str) -> Vec<&str> {
        self.segments
            .iter()
            .filter(|s| s.name.starts_with(prefix))
            .map(|s| s.name.as_str())
            .collect()
    }
}

/// Appends segments back to back; offsets are assigned in push order.
pub struct SegmentMapBuilder {
    segments: Vec<Segment>,
    cursor: usize,
}

impl SegmentMapBuilder {
    /// Reserve `len` slots under `name`; returns the segment's offset.
    pub fn push(&mut self, name: impl Into<String>, len: usize) -> usize {
        let name = name.into();
        debug_assert!(
            !self.segments.iter().any(|s| s.name == name),
            "duplicate segment name {name}"
        );
        let offset = self.cursor;
        self.segments.push(Segment { name, offset, len });
        self.cursor += len;
        offset
    }

    pub fn finish(self) -> Arc<SegmentMap> {
        Arc::new(SegmentMap { segments: self.segments, total: self.cursor })
    }
}

/// All parameters of a model, flat, with named-segment access.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterVector {
    values: Vec<f64>,
    layout: Arc<SegmentMap>,
}

impl ParameterVector {
    pub fn zeros(layout: Arc<SegmentMap>) -> Self {
        ParameterVector { values: vec![0.0; layout.total_len()], layout }
    }

    pub fn from_values(layout: Arc<SegmentMap>, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.total_len() {
            return Err(Error::shape(format!(
                "parameter vector has {} values, layout expects {}",
                values.len(),
                layout.total_len()
            )));
        }
        Ok(ParameterVector { values, layout })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn layout(&self) -> &Arc<SegmentMap> {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn segment(&self, name: &str) -> Option<&[f64]> {
        let s = self.layout.get(name)?;
        Some(&self.values[s.offset..s.offset + s.len])
    }

    pub fn segment_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let s = self.layout.get(name)?;
        Some(&mut self.values[s.offset..s.offset + s.len])
    }

    pub fn fill(&mut self, v: f64) {
        self.values.iter_mut().for_each(|x| *x = v);
    }

    /// `self += c * other`. Layouts must match.
    pub fn add_scaled(&mut self, other: &ParameterVector, c: f64) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|x| *x *= c);
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }

    /// Err(NonFinite) naming `what` if any entry is NaN/Inf.
    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.all_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }

    /// Write the `.pvec` checkpoint format:
    /// `u64 segment_count; { u64 name_len, name bytes, u64 offset, u64 len }*;
    /// u64 value_count; f64 values*` — all integers and floats little-endian.
    pub fn save_pvec(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf: Vec<u8> = Vec::with_capacity(16 + self.values.len() * 8);
        let segs = self.layout.segments();
        buf.extend_from_slice(&(segs.len() as u64).to_le_bytes());
        for s in segs {
            buf.extend_from_slice(&(s.name.len() as u64).to_le_bytes());
            buf.extend_from_slice(s.name.as_bytes());
            buf.extend_from_slice(&(s.offset as u64).to_le_bytes());
            buf.extend_from_slice(&(s.len as u64).to_le_bytes());
        }
        buf.extend_from_slice(&(self.values.len() as u64).to_le_bytes());
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(&buf)?;
        Ok(())
    }

    pub fn load_pvec(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;

        fn u64_at(bytes: &[u8], pos: &mut usize, display: &str) -> Result<u64> {
            if *pos + 8 > bytes.len() {
                return Err(Error::format(display, "truncated file"));
            }
            let v = u64::from_le_bytes(bytes[*pos..*pos + 8].try_into().unwrap());
            *pos += 8;
            Ok(v)
        }

        let mut pos = 0usize;
        let n_segs = u64_at(&bytes, &mut pos, &display)? as usize;
        if n_segs > 1_000_000 {
            return Err(Error::format(&display, "implausible segment count"));
        }
        let mut builder = SegmentMap::builder();
        let mut expected_offsets = Vec::with_capacity(n_segs);
        for _ in 0..n_segs {
            let name_len = u64_at(&bytes, &mut pos, &display)? as usize;
            if pos + name_len > bytes.len() {
                return Err(Error::format(&display, "truncated segment name"));
            }
            let name = std::str::from_utf8(&bytes[pos..pos + name_len])
                .map_err(|_| Error::format(&display, "segment name is not UTF-8"))?
                .to_string();
            pos += name_len;
            let offset = u64_at(&bytes, &mut pos, &display)? as usize;
            let len = u64_at(&bytes, &mut pos, &display)? as usize;
            expected_offsets.push((offset, builder.push(name, len)));
        }
        for (stored, assigned) in &expected_offsets {
            if stored != assigned {
                return Err(Error::format(&display, "segments are not contiguous in push order"));
            }
        }
        let layout = builder.finish();
        let n_values = u64_at(&bytes, &mut pos, &display)? as usize;
        if n_values != layout.total_len() {
            return Err(Error::format(
                &display,
                format!("value count {} does not match layout total {}", n_values, layout.total_len()),
            ));
        }
        if pos + n_values * 8 != bytes.len() {
            return Err(Error::format(&display, "file length does not match value count"));
        }
        let mut values = Vec::with_capacity(n_values);
        for i in 0..n_values {
            let start = pos + i * 8;
            values.push(f64::from_le_bytes(bytes[start..start + 8].try_into().unwrap()));
        }
        ParameterVector::from_values(layout, values)
    }
}

/// Per-coordinate freeze mask, built from segment names. Frozen coordinates
/// are skipped entirely by the optimizer: neither the parameter nor its
/// moment estimates move.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FreezeMask {
    frozen: Vec<bool>,
}

impl FreezeMask {
    pub fn none(len: usize) -> Self {
        FreezeMask { frozen: vec![false; len] }
    }

    /// Freeze every segment whose name starts with one of `prefixes`.
    pub fn freeze_prefixes(layout: &SegmentMap, prefixes: &[&str]) -> Self {
        let mut frozen = vec![false; layout.total_len()];
        for s in layout.segments() {
            if prefixes.iter().any(|p| s.name.starts_with(p)) {
                frozen[s.offset..s.offset + s.len].iter_mut().for_each(|f| *f = true);
            }
        }
        FreezeMask { frozen }
    }

    pub fn len(&self) -> usize {
        self.frozen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frozen.is_empty()
    }

    pub fn is_frozen(&self, i: usize) -> bool {
        self.frozen[i]
    }

    pub fn frozen_count(&self) -> usize {
        self.frozen.iter().filter(|&&f| f).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_layout() -> Arc<SegmentMap> {
        let mut b = SegmentMap::builder();
        b.push("actor.w0", 6);
        b.push("actor.b0", 3);
        b.push("critic.w0", 4);
        b.finish()
    }

    #[test]
    fn segments_cover_contiguously() {
        let layout = demo_layout();
        assert_eq!(layout.total_len(), 13);
        let s = layout.get("actor.b0").unwrap();
        assert_eq!((s.offset, s.len), (6, 3));
        assert_eq!(layout.names_with_prefix("actor."), vec!["actor.w0", "actor.b0"]);
    }

    #[test]
    fn segment_views_alias_the_flat_vector() {
        let mut p = ParameterVector::zeros(demo_layout());
        p.segment_mut("critic.w0").unwrap().copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(&p.values()[9..13], &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(p.segment("critic.w0").unwrap(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn pvec_roundtrip_is_bitwise() {
        let layout = demo_layout();
        let mut p = ParameterVector::zeros(layout);
        for (i, v) in p.values_mut().iter_mut().enumerate() {
            // Include awkward values: subnormals, negative zero, exact dyadics.
            *v = match i % 4 {
                0 => -0.0,
                1 => 1.0e-310,
                2 => -(i as f64) / 3.0,
                _ => (i as f64) * 0.125,
            };
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.pvec");
        p.save_pvec(&path).unwrap();
        let q = ParameterVector::load_pvec(&path).unwrap();
        assert_eq!(p.layout().segments(), q.layout().segments());
        // Bit-exact, including -0.0 and subnormals.
        for (a, b) in p.values().iter().zip(q.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn pvec_rejects_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pvec");
        let p = ParameterVector::zeros(demo_layout());
        p.save_pvec(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 5);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(ParameterVector::load_pvec(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn freeze_mask_by_prefix() {
        let layout = demo_layout();
        let m = FreezeMask::freeze_prefixes(&layout, &["critic."]);
        assert_eq!(m.frozen_count(), 4);
        assert!(!m.is_frozen(0));
        assert!(m.is_frozen(9));
        assert!(m.is_frozen(12));
    }

    #[test]
    fn ensure_finite_flags_nan() {
        let mut p = ParameterVector::zeros(demo_layout());
        assert!(p.ensure_finite("x").is_ok());
        p.values_mut()[5] = f64::NAN;
        assert!(matches!(p.ensure_finite("x"), Err(Error::NonFinite(_))));
    }
}
