//! Just enough of the `.npy` / `.npz` container formats to read the 2D
//! Shapes archive and write interchange copies of generated datasets.

use std::io::{Read, Seek, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum NpyData {
    U8(Vec<u8>),
    I64(Vec<i64>),
    I32(Vec<i32>),
    F64(Vec<f64>),
    F32(Vec<f32>),
}

impl NpyData {
    pub fn len(&self) -> usize {
        match self {
            NpyData::U8(v) => v.len(),
            NpyData::I64(v) => v.len(),
            NpyData::I32(v) => v.len(),
            NpyData::F64(v) => v.len(),
            NpyData::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn descr(&self) -> &'static str {
        match self {
            NpyData::U8(_) => "|u1",
            NpyData::I64(_) => "<i8",
            NpyData::I32(_) => "<i4",
            NpyData::F64(_) => "<f8",
            NpyData::F32(_) => "<f4",
        }
    }

    /// Integer view of the values; floats must hold exact integers.
    pub fn to_i64(&self, entry: &str) -> Result<Vec<i64>> {
        let from_float = |v: f64| {
            if v.fract() == 0.0 && v.abs() < 9.0e15 {
                Ok(v as i64)
            } else {
                Err(Error::format(entry, format!("value {v} is not an integer class")))
            }
        };
        match self {
            NpyData::U8(v) => Ok(v.iter().map(|&x| x as i64).collect()),
            NpyData::I64(v) => Ok(v.clone()),
            NpyData::I32(v) => Ok(v.iter().map(|&x| x as i64).collect()),
            NpyData::F64(v) => v.iter().map(|&x| from_float(x)).collect(),
            NpyData::F32(v) => v.iter().map(|&x| from_float(x as f64)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: NpyData,
}

impl NpyArray {
    pub fn new(shape: Vec<usize>, data: NpyData) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }
}

const MAGIC: &[u8] = b"\x93NUMPY";

/// Parses one `.npy` payload. `entry` names the array in error messages.
pub fn parse_npy(bytes: &[u8], entry: &str) -> Result<NpyArray> {
    let bad = |reason: &str| Error::format(entry, reason.to_string());
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(bad("missing npy magic"));
    }
    let major = bytes[6];
    let (header_len, offset) = match major {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 => {
            if bytes.len() < 12 {
                return Err(bad("truncated header"));
            }
            (u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize, 12)
        }
        _ => return Err(bad("unsupported npy version")),
    };
    let header = bytes
        .get(offset..offset + header_len)
        .ok_or_else(|| bad("truncated header"))?;
    let header = std::str::from_utf8(header).map_err(|_| bad("header is not text"))?;
    let descr = dict_value(header, "descr").ok_or_else(|| bad("header lacks descr"))?;
    let descr = descr.trim_matches(|c| c == '\'' || c == '"');
    let fortran = dict_value(header, "fortran_order").ok_or_else(|| bad("header lacks fortran_order"))?;
    if fortran.trim() != "False" {
        return Err(bad("fortran-ordered arrays are not supported"));
    }
    let shape_text = dict_value(header, "shape").ok_or_else(|| bad("header lacks shape"))?;
    let shape: Vec<usize> = shape_text
        .trim_matches(|c| c == '(' || c == ')')
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| bad("malformed shape")))
        .collect::<Result<_>>()?;
    let count: usize = shape.iter().product();
    let body = &bytes[offset + header_len..];
    let need = |width: usize| -> Result<&[u8]> {
        body.get(..count * width)
            .ok_or_else(|| bad(&format!("expected {} data bytes, found {}", count * width, body.len())))
    };
    let data = match descr {
        "|u1" | "<u1" | "|b1" => NpyData::U8(need(1)?.to_vec()),
        "<i8" => NpyData::I64(
            need(8)?
                .chunks_exact(8)
                .map(|c| i64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect(),
        ),
        "<i4" => NpyData::I32(
            need(4)?
                .chunks_exact(4)
                .map(|c| i32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect(),
        ),
        "<f8" => NpyData::F64(
            need(8)?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect(),
        ),
        "<f4" => NpyData::F32(
            need(4)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect(),
        ),
        other => return Err(bad(&format!("unsupported dtype {other}"))),
    };
    Ok(NpyArray { shape, data })
}

/// Raw text of `key`'s value in a Python dict literal (values here never
/// contain nested dicts).
fn dict_value<'a>(header: &'a str, key: &str) -> Option<&'a str> {
    let start = header.find(&format!("'{key}'"))? + key.len() + 2;
    let rest = header[start..].trim_start().strip_prefix(':')?.trim_start();
    let end = if rest.starts_with('(') {
        rest.find(')')? + 1
    } else {
        rest.find([',', '}'])?
    };
    Some(rest[..end].trim())
}

pub fn encode_npy(array: &NpyArray) -> Vec<u8> {
    let shape = match array.shape.len() {
        1 => format!("({},)", array.shape[0]),
        _ => format!(
            "({})",
            array.shape.iter().map(usize::to_string).collect::<Vec<_>>().join(", ")
        ),
    };
    let mut header = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
        array.data.descr(),
        shape
    );
    let unpadded = 10 + header.len() + 1;
    header.push_str(&" ".repeat((64 - unpadded % 64) % 64));
    header.push('\n');
    let mut out = Vec::with_capacity(10 + header.len() + array.data.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    match &array.data {
        NpyData::U8(v) => out.extend_from_slice(v),
        NpyData::I64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        NpyData::I32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        NpyData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        NpyData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
    }
    out
}

/// Reads the named entries (`name` without the `.npy` suffix) of an `.npz`
/// archive. Missing entries are returned as `None`; unlisted entries are
/// skipped without being decoded.
pub fn read_npz_entries<R: Read + Seek>(reader: R, wanted: &[&str], label: &str) -> Result<Vec<Option<NpyArray>>> {
    let mut zip = zip::ZipArchive::new(reader).map_err(|e| Error::format(label, e.to_string()))?;
    let mut out = Vec::with_capacity(wanted.len());
    for name in wanted {
        let file_name = format!("{name}.npy");
        match zip.by_name(&file_name) {
            Ok(mut entry) => {
                let mut bytes = Vec::with_capacity(entry.size() as usize);
                entry
                    .read_to_end(&mut bytes)
                    .map_err(|e| Error::format(*name, e.to_string()))?;
                out.push(Some(parse_npy(&bytes, name)?));
            }
            Err(zip::result::ZipError::FileNotFound) => out.push(None),
            Err(e) => return Err(Error::format(*name, e.to_string())),
        }
    }
    Ok(out)
}

pub fn write_npz<W: Write + Seek>(writer: W, entries: &[(&str, &NpyArray)]) -> std::io::Result<()> {
    let mut zip = zip::ZipWriter::new(writer);
    let opts = zip::write::SimpleFileOptions::default()
        .compression_method(zip::CompressionMethod::Deflated)
        .large_file(true);
    for (name, array) in entries {
        zip.start_file(format!("{name}.npy"), opts).map_err(std::io::Error::other)?;
        zip.write_all(&encode_npy(array))?;
    }
    zip.finish().map_err(std::io::Error::other)?;
    Ok(())
}
