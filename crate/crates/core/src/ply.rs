//! Minimal PLY reader and writer for point clouds.
//!
//! Vertices carry float32 positions, an optional uchar colour and any number
//! of named float32 scalar channels. The reader accepts any scalar type for
//! vertex properties and skips other elements (faces etc.).

use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlyData {
    pub positions: Vec<[f32; 3]>,
    pub colors: Option<Vec<[u8; 3]>>,
    /// Named per-vertex channels in file order.
    pub scalars: Vec<(String, Vec<f32>)>,
}

impl PlyData {
    pub fn new(positions: Vec<[f32; 3]>) -> Self {
        Self {
            positions,
            colors: None,
            scalars: Vec::new(),
        }
    }

    pub fn with_scalar(mut self, name: &str, values: Vec<f32>) -> Self {
        self.scalars.push((name.to_string(), values));
        self
    }

    pub fn scalar(&self, name: &str) -> Option<&[f32]> {
        self.scalars
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    fn validate(&self) -> Result<()> {
        let n = self.positions.len();
        if let Some(c) = &self.colors {
            if c.len() != n {
                return Err(Error::Ply(format!("{} colours for {} vertices", c.len(), n)));
            }
        }
        for (name, v) in &self.scalars {
            if v.len() != n {
                return Err(Error::Ply(format!("channel {name} has {} values for {n} vertices", v.len())));
            }
            if name.is_empty() || name.chars().any(char::is_whitespace) {
                return Err(Error::Ply(format!("invalid channel name {name:?}")));
            }
        }
        Ok(())
    }
}

pub fn write_ply<W: Write>(out: &mut W, data: &PlyData, format: PlyFormat) -> Result<()> {
    data.validate()?;
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    let mut header = format!(
        "ply\nformat {fmt} 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n",
        data.positions.len()
    );
    if data.colors.is_some() {
        header.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    for (name, _) in &data.scalars {
        header.push_str(&format!("property float {name}\n"));
    }
    header.push_str("end_header\n");
    out.write_all(header.as_bytes())?;

    for (i, p) in data.positions.iter().enumerate() {
        match format {
            PlyFormat::Ascii => {
                let mut line = format!("{} {} {}", p[0], p[1], p[2]);
                if let Some(c) = &data.colors {
                    line.push_str(&format!(" {} {} {}", c[i][0], c[i][1], c[i][2]));
                }
                for (_, v) in &data.scalars {
                    line.push_str(&format!(" {}", v[i]));
                }
                line.push('\n');
                out.write_all(line.as_bytes())?;
            }
            PlyFormat::BinaryLittleEndian => {
                for x in p {
                    out.write_all(&x.to_le_bytes())?;
                }
                if let Some(c) = &data.colors {
                    out.write_all(&c[i])?;
                }
                for (_, v) in &data.scalars {
                    out.write_all(&v[i].to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            other => return Err(Error::Ply(format!("unknown scalar type {other}"))),
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: ScalarType },
    List { count: ScalarType, item: ScalarType },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Encoding {
    Ascii,
    Little,
    Big,
}

pub fn read_ply<R: Read>(input: R) -> Result<PlyData> {
    let mut reader = BufReader::new(input);
    let mut line = String::new();
    let next_line = |reader: &mut BufReader<R>, line: &mut String| -> Result<()> {
        line.clear();
        if reader.read_line(line)? == 0 {
            return Err(Error::Ply("unexpected end of header".into()));
        }
        Ok(())
    };
    next_line(&mut reader, &mut line)?;
    if line.trim() != "ply" {
        return Err(Error::Ply("missing magic line".into()));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        next_line(&mut reader, &mut line)?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["end_header"] => break,
            ["format", f, _] => {
                encoding = Some(match *f {
                    "ascii" => Encoding::Ascii,
                    "binary_little_endian" => Encoding::Little,
                    "binary_big_endian" => Encoding::Big,
                    other => return Err(Error::Ply(format!("unknown format {other}"))),
                })
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| Error::Ply(format!("bad element count {count}")))?,
                props: Vec::new(),
            }),
            ["property", "list", c, i, _name] => elements
                .last_mut()
                .ok_or_else(|| Error::Ply("property before element".into()))?
                .props
                .push(Property::List {
                    count: ScalarType::parse(c)?,
                    item: ScalarType::parse(i)?,
                }),
            ["property", ty, name] => elements
                .last_mut()
                .ok_or_else(|| Error::Ply("property before element".into()))?
                .props
                .push(Property::Scalar {
                    name: name.to_string(),
                    ty: ScalarType::parse(ty)?,
                }),
            _ => return Err(Error::Ply(format!("unrecognised header line {:?}", line.trim()))),
        }
    }
    let encoding = encoding.ok_or_else(|| Error::Ply("missing format line".into()))?;
    let mut body = Vec::new();
    reader.read_to_end(&mut body)?;
    let mut src = match encoding {
        Encoding::Ascii => Source::Ascii(
            std::str::from_utf8(&body)
                .map_err(|_| Error::Ply("ascii body is not utf-8".into()))?
                .split_ascii_whitespace()
                .collect::<Vec<_>>()
                .into_iter(),
        ),
        Encoding::Little | Encoding::Big => Source::Binary {
            bytes: &body,
            pos: 0,
            big: encoding == Encoding::Big,
        },
    };

    let mut data = PlyData::default();
    let mut seen_vertex = false;
    for el in &elements {
        let is_vertex = el.name == "vertex" && !seen_vertex;
        if !is_vertex {
            for _ in 0..el.count {
                for p in &el.props {
                    match p {
                        Property::Scalar { ty, .. } => {
                            src.next(*ty)?;
                        }
                        Property::List { count, item } => {
                            let n = src.next(*count)? as usize;
                            for _ in 0..n {
                                src.next(*item)?;
                            }
                        }
                    }
                }
            }
            continue;
        }
        seen_vertex = true;
        let names: Vec<Option<&str>> = el
            .props
            .iter()
            .map(|p| match p {
                Property::Scalar { name, .. } => Some(name.as_str()),
                Property::List { .. } => None,
            })
            .collect();
        let slot = |n: &str| names.iter().position(|x| *x == Some(n));
        let (xi, yi, zi) = match (slot("x"), slot("y"), slot("z")) {
            (Some(x), Some(y), Some(z)) => (x, y, z),
            _ => return Err(Error::Ply("vertex element lacks x/y/z".into())),
        };
        let rgb = match (slot("red"), slot("green"), slot("blue")) {
            (Some(r), Some(g), Some(b)) => Some([r, g, b]),
            _ => None,
        };
        let reserved = |k: usize| k == xi || k == yi || k == zi || rgb.is_some_and(|c| c.contains(&k));
        let mut scalar_slots = Vec::new();
        for (k, n) in names.iter().enumerate() {
            if let Some(n) = n {
                if !reserved(k) {
                    scalar_slots.push(k);
                    data.scalars.push((n.to_string(), Vec::with_capacity(el.count)));
                }
            }
        }
        let mut colors = rgb.map(|_| Vec::with_capacity(el.count));
        let mut row = vec![0.0f64; el.props.len()];
        for _ in 0..el.count {
            for (k, p) in el.props.iter().enumerate() {
                row[k] = match p {
                    Property::Scalar { ty, .. } => src.next(*ty)?,
                    Property::List { count, item } => {
                        let n = src.next(*count)? as usize;
                        for _ in 0..n {
                            src.next(*item)?;
                        }
                        0.0
                    }
                };
            }
            data.positions.push([row[xi] as f32, row[yi] as f32, row[zi] as f32]);
            if let (Some(c), Some(slots)) = (colors.as_mut(), rgb) {
                c.push(slots.map(|k| row[k].clamp(0.0, 255.0) as u8));
            }
            for (ch, &k) in scalar_slots.iter().enumerate() {
                data.scalars[ch].1.push(row[k] as f32);
            }
        }
        data.colors = colors;
    }
    if !seen_vertex {
        return Err(Error::Ply("no vertex element".into()));
    }
    Ok(data)
}

enum Source<'a> {
    Ascii(std::vec::IntoIter<&'a str>),
    Binary { bytes: &'a [u8], pos: usize, big: bool },
}

impl Source<'_> {
    fn next(&mut self, ty: ScalarType) -> Result<f64> {
        match self {
            Source::Ascii(tokens) => {
                let tok = tokens
                    .next()
                    .ok_or_else(|| Error::Ply("truncated ascii body".into()))?;
                let bad = || Error::Ply(format!("bad number {tok:?}"));
                // parse float32 directly so shortest-repr text round-trips exactly
                if ty == ScalarType::F32 {
                    tok.parse::<f32>().map(f64::from).map_err(|_| bad())
                } else {
                    tok.parse::<f64>().map_err(|_| bad())
                }
            }
            Source::Binary { bytes, pos, big } => {
                let size = ty.size();
                let raw = bytes
                    .get(*pos..*pos + size)
                    .ok_or_else(|| Error::Ply("truncated binary body".into()))?;
                *pos += size;
                let mut buf = [0u8; 8];
                buf[..size].copy_from_slice(raw);
                if *big {
                    buf[..size].reverse();
                }
                Ok(match ty {
                    ScalarType::I8 => buf[0] as i8 as f64,
                    ScalarType::U8 => buf[0] as f64,
                    ScalarType::I16 => i16::from_le_bytes([buf[0], buf[1]]) as f64,
                    ScalarType::U16 => u16::from_le_bytes([buf[0], buf[1]]) as f64,
                    ScalarType::I32 => i32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as f64,
                    ScalarType::U32 => u32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as f64,
                    ScalarType::F32 => f32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as f64,
                    ScalarType::F64 => f64::from_le_bytes(buf),
                })
            }
        }
    }
}
