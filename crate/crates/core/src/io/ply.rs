use std::fmt::Write as _;
use std::path::Path;

use super::{assemble, CloudFile, CloudFormat};
use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(&self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(&self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

/// Which vertex properties carry coordinates / normals.
#[derive(Debug, Default)]
struct Slots {
    xyz: [Option<usize>; 3],
    normal: [Option<usize>; 3],
}

impl Slots {
    fn of(el: &Element) -> Self {
        let mut s = Slots::default();
        for (i, p) in el.props.iter().enumerate() {
            if let Property::Scalar { name, .. } = p {
                match name.as_str() {
                    "x" => s.xyz[0] = Some(i),
                    "y" => s.xyz[1] = Some(i),
                    "z" => s.xyz[2] = Some(i),
                    "nx" => s.normal[0] = Some(i),
                    "ny" => s.normal[1] = Some(i),
                    "nz" => s.normal[2] = Some(i),
                    _ => {}
                }
            }
        }
        s
    }

    fn has_normals(&self) -> bool {
        self.normal.iter().all(|n| n.is_some())
    }
}

struct Header {
    binary: bool,
    elements: Vec<Element>,
    body_start: usize,
    lines: usize,
}

fn perr(path: &Path, location: String, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        location,
        message: message.into(),
    }
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<Header> {
    let mut pos = 0usize;
    let mut line_no = 0usize;
    let mut binary = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let Some(nl) = bytes[pos..].iter().position(|&b| b == b'\n') else {
            return Err(perr(path, format!("byte {pos}"), "header is not terminated by end_header"));
        };
        line_no += 1;
        let raw = &bytes[pos..pos + nl];
        let line_start = pos;
        pos += nl + 1;
        let line = std::str::from_utf8(raw)
            .map_err(|_| perr(path, format!("line {line_no}"), "header is not valid UTF-8"))?
            .trim_end_matches('\r');
        let loc = || format!("line {line_no} (byte {line_start})");
        let mut tok = line.split_whitespace();
        let Some(keyword) = tok.next() else { continue };
        match keyword {
            "ply" if line_no == 1 => {}
            _ if line_no == 1 => return Err(perr(path, loc(), "missing 'ply' magic line")),
            "format" => {
                let kind = tok.next().unwrap_or("");
                let version = tok.next().unwrap_or("");
                if version != "1.0" {
                    return Err(perr(path, loc(), format!("unsupported PLY version '{version}'")));
                }
                binary = Some(match kind {
                    "ascii" => false,
                    "binary_little_endian" => true,
                    "binary_big_endian" => {
                        return Err(perr(path, loc(), "big-endian binary PLY is not supported"))
                    }
                    other => return Err(perr(path, loc(), format!("unknown PLY format '{other}'"))),
                });
            }
            "comment" | "obj_info" => {}
            "element" => {
                let name = tok.next().ok_or_else(|| perr(path, loc(), "element without name"))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| perr(path, loc(), "element count is not a non-negative integer"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            "property" => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| perr(path, loc(), "property before any element"))?;
                let ty = tok.next().unwrap_or("");
                let prop = if ty == "list" {
                    let count = tok.next().and_then(Scalar::parse);
                    let item = tok.next().and_then(Scalar::parse);
                    match (count, item, tok.next()) {
                        (Some(count), Some(item), Some(_name)) => Property::List { count, item },
                        _ => return Err(perr(path, loc(), "malformed list property")),
                    }
                } else {
                    let ty = Scalar::parse(ty)
                        .ok_or_else(|| perr(path, loc(), format!("unknown property type '{ty}'")))?;
                    let name = tok.next().ok_or_else(|| perr(path, loc(), "property without name"))?;
                    Property::Scalar {
                        name: name.to_string(),
                        ty,
                    }
                };
                el.props.push(prop);
            }
            "end_header" => break,
            other => return Err(perr(path, loc(), format!("unexpected header keyword '{other}'"))),
        }
    }
    let binary = binary.ok_or_else(|| perr(path, format!("line {line_no}"), "missing format line"))?;
    Ok(Header {
        binary,
        elements,
        body_start: pos,
        lines: line_no,
    })
}

pub fn parse_ply(bytes: &[u8], path: &Path) -> Result<CloudFile> {
    let header = parse_header(bytes, path)?;
    let vertex = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| perr(path, format!("line {}", header.lines), "no vertex element"))?;
    let slots = Slots::of(&header.elements[vertex]);
    if slots.xyz.iter().any(|s| s.is_none()) {
        return Err(perr(path, format!("line {}", header.lines), "vertex element lacks x, y or z"));
    }
    for el in &header.elements {
        if el.name != "vertex" && el.count > 0 {
            log::warn!("{}: skipping {} '{}' elements", path.display(), el.count, el.name);
        }
    }
    let (points, normals) = if header.binary {
        read_binary(bytes, &header, vertex, &slots, path)?
    } else {
        read_ascii(bytes, &header, vertex, &slots, path)?
    };
    let had_normals = normals.is_some();
    let cloud = assemble(points, normals, path)?;
    Ok(CloudFile {
        format: if header.binary {
            CloudFormat::PlyBinaryLe
        } else {
            CloudFormat::PlyAscii
        },
        had_normals: had_normals && cloud.has_normals(),
        cloud,
    })
}

type Columns = (Vec<Point3>, Option<Vec<Vec3>>);

/// Caps preallocation so a lying header cannot exhaust memory.
fn capacity_hint(count: usize, remaining: usize, min_row: usize) -> usize {
    count.min(remaining / min_row.max(1) + 1).min(1 << 24)
}

fn finish_vertex(
    row: &[f64],
    slots: &Slots,
    points: &mut Vec<Point3>,
    normals: &mut Option<Vec<Vec3>>,
) -> bool {
    let g = |s: Option<usize>| s.map(|i| row[i]).unwrap_or(0.0);
    let p = Point3::new(g(slots.xyz[0]), g(slots.xyz[1]), g(slots.xyz[2]));
    if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
        return false;
    }
    points.push(p);
    if let Some(ns) = normals {
        ns.push(Vec3::new(g(slots.normal[0]), g(slots.normal[1]), g(slots.normal[2])));
    }
    true
}

fn read_binary(bytes: &[u8], header: &Header, vertex: usize, slots: &Slots, path: &Path) -> Result<Columns> {
    let mut pos = header.body_start;
    let el = &header.elements[vertex];
    let min_row: usize = el
        .props
        .iter()
        .map(|p| match p {
            Property::Scalar { ty, .. } => ty.size(),
            Property::List { count, .. } => count.size(),
        })
        .sum();
    let cap = capacity_hint(el.count, bytes.len().saturating_sub(pos), min_row);
    let mut points = Vec::with_capacity(cap);
    let mut normals = slots.has_normals().then(|| Vec::with_capacity(cap));
    let mut row = vec![0.0f64; el.props.len()];

    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        let end = pos.checked_add(n).filter(|&e| e <= bytes.len()).ok_or_else(|| {
            perr(path, format!("byte {}", *pos), "truncated body")
        })?;
        let s = &bytes[*pos..end];
        *pos = end;
        Ok(s)
    };

    for (ei, el) in header.elements.iter().enumerate() {
        for _ in 0..el.count {
            let row_start = pos;
            for (pi, prop) in el.props.iter().enumerate() {
                match prop {
                    Property::Scalar { ty, .. } => {
                        let v = ty.read_le(take(&mut pos, ty.size())?);
                        if ei == vertex {
                            row[pi] = v;
                        }
                    }
                    Property::List { count, item } => {
                        let n = count.read_le(take(&mut pos, count.size())?);
                        if !(n >= 0.0 && n.fract() == 0.0) {
                            return Err(perr(path, format!("byte {row_start}"), "negative list length"));
                        }
                        let len = (n as usize)
                            .checked_mul(item.size())
                            .ok_or_else(|| perr(path, format!("byte {pos}"), "list too long"))?;
                        take(&mut pos, len)?;
                    }
                }
            }
            if ei == vertex && !finish_vertex(&row, slots, &mut points, &mut normals) {
                return Err(perr(path, format!("byte {row_start}"), "non-finite vertex coordinate"));
            }
        }
    }
    if pos != bytes.len() {
        log::warn!("{}: {} trailing bytes ignored", path.display(), bytes.len() - pos);
    }
    Ok((points, normals))
}

fn read_ascii(bytes: &[u8], header: &Header, vertex: usize, slots: &Slots, path: &Path) -> Result<Columns> {
    let body = std::str::from_utf8(&bytes[header.body_start..])
        .map_err(|e| perr(path, format!("byte {}", header.body_start + e.valid_up_to()), "body is not valid UTF-8"))?;
    let mut tokens = body
        .lines()
        .enumerate()
        .flat_map(|(i, l)| l.split_whitespace().map(move |t| (header.lines + 1 + i, t)));
    let mut last_line = header.lines;
    let mut next = |what: &str| -> Result<(usize, f64)> {
        match tokens.next() {
            Some((line, t)) => {
                last_line = line;
                t.parse::<f64>()
                    .map(|v| (line, v))
                    .map_err(|_| perr(path, format!("line {line}"), format!("cannot parse {what} value '{t}'")))
            }
            None => Err(perr(path, format!("line {last_line}"), "truncated body")),
        }
    };

    let el = &header.elements[vertex];
    let cap = capacity_hint(el.count, body.len(), 2 * el.props.len());
    let mut points = Vec::with_capacity(cap);
    let mut normals = slots.has_normals().then(|| Vec::with_capacity(cap));
    let mut row = vec![0.0f64; el.props.len()];
    for (ei, el) in header.elements.iter().enumerate() {
        for _ in 0..el.count {
            let mut row_line = 0;
            for (pi, prop) in el.props.iter().enumerate() {
                match prop {
                    Property::Scalar { .. } => {
                        let (line, v) = next("property")?;
                        row_line = line;
                        if ei == vertex {
                            row[pi] = v;
                        }
                    }
                    Property::List { .. } => {
                        let (line, n) = next("list length")?;
                        if !(n >= 0.0 && n.fract() == 0.0 && n < 1e9) {
                            return Err(perr(path, format!("line {line}"), "invalid list length"));
                        }
                        for _ in 0..n as usize {
                            next("list item")?;
                        }
                    }
                }
            }
            if ei == vertex && !finish_vertex(&row, slots, &mut points, &mut normals) {
                return Err(perr(path, format!("line {row_line}"), "non-finite vertex coordinate"));
            }
        }
    }
    Ok((points, normals))
}

/// Serializes the cloud as PLY with `double` vertex properties.
pub fn write_ply(cloud: &PointCloud, binary: bool) -> Vec<u8> {
    let mut header = String::from("ply\n");
    header.push_str(if binary {
        "format binary_little_endian 1.0\n"
    } else {
        "format ascii 1.0\n"
    });
    let _ = writeln!(header, "element vertex {}", cloud.len());
    let names: &[&str] = if cloud.has_normals() {
        &["x", "y", "z", "nx", "ny", "nz"]
    } else {
        &["x", "y", "z"]
    };
    for n in names {
        let _ = writeln!(header, "property double {n}");
    }
    header.push_str("end_header\n");

    let mut out = header.into_bytes();
    let normals = cloud.normals();
    if binary {
        out.reserve(cloud.len() * names.len() * 8);
        for (i, p) in cloud.points().iter().enumerate() {
            for v in [p.x, p.y, p.z] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            if let Some(ns) = normals {
                for v in [ns[i].x, ns[i].y, ns[i].z] {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    } else {
        let mut text = String::with_capacity(cloud.len() * 40);
        for (i, p) in cloud.points().iter().enumerate() {
            let _ = write!(text, "{} {} {}", p.x, p.y, p.z);
            if let Some(ns) = normals {
                let _ = write!(text, " {} {} {}", ns[i].x, ns[i].y, ns[i].z);
            }
            text.push('\n');
        }
        out.extend_from_slice(text.as_bytes());
    }
    out
}
