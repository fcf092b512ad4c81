// Copyright 2026 The lfsrecon Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Point cloud and mesh file formats: XYZ, PLY (ascii and binary
//! little-endian) and OBJ.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::lfs::ScalarField;

type P = Vec3<f64>;

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

/// Splits normals into a separate list, or `None` if any is missing.
fn finish_cloud(points: Vec<P>, normals: Vec<Option<P>>) -> Result<PointCloud<f64>> {
    let normals = if !normals.is_empty() && normals.iter().all(Option::is_some) {
        Some(normals.into_iter().map(|n| n.unwrap().normalized()).collect())
    } else {
        None
    };
    PointCloud::with_normals(points, normals)
}

/// Reads `x y z` or `x y z nx ny nz` lines; `#` starts a comment.
pub fn read_xyz<R: BufRead>(reader: R) -> Result<PointCloud<f64>> {
    let mut points = Vec::new();
    let mut normals = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| parse_err(i + 1, e.to_string()))?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let vals: Vec<f64> = body
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| parse_err(i + 1, format!("bad number `{t}`"))))
            .collect::<Result<_>>()?;
        match vals.len() {
            3 | 6 => {}
            n => return Err(parse_err(i + 1, format!("expected 3 or 6 values, found {n}"))),
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(i + 1, "non-finite coordinate"));
        }
        points.push(P::new(vals[0], vals[1], vals[2]));
        normals.push((vals.len() == 6).then(|| P::new(vals[3], vals[4], vals[5])));
    }
    if points.is_empty() {
        return Err(Error::Input("no points in XYZ input".into()));
    }
    finish_cloud(points, normals)
}

pub fn write_xyz<W: Write>(mut w: W, cloud: &PointCloud<f64>) -> std::io::Result<()> {
    for (i, p) in cloud.points().iter().enumerate() {
        match cloud.normals() {
            Some(n) => {
                let n = n[i];
                writeln!(w, "{} {} {} {} {} {}", p.x, p.y, p.z, n.x, n.y, n.z)?
            }
            None => writeln!(w, "{} {} {}", p.x, p.y, p.z)?,
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
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

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Clone, Debug)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Clone, Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

/// Raw PLY content: vertex properties by name and face index lists.
#[derive(Clone, Debug, Default)]
pub struct PlyData {
    pub vertex_props: Vec<String>,
    pub vertices: Vec<Vec<f64>>,
    pub faces: Vec<Vec<usize>>,
}

impl PlyData {
    fn column(&self, name: &str) -> Option<usize> {
        self.vertex_props.iter().position(|p| p == name)
    }
}

/// Parses an ascii or binary little-endian PLY stream.
pub fn read_ply<R: BufRead>(mut r: R) -> Result<PlyData> {
    let mut line = String::new();
    let mut lineno = 0;
    let mut next_line = |r: &mut R, line: &mut String| -> Result<usize> {
        line.clear();
        lineno += 1;
        let n = r.read_line(line).map_err(|e| parse_err(lineno, e.to_string()))?;
        if n == 0 {
            return Err(parse_err(lineno, "unexpected end of header"));
        }
        Ok(lineno)
    };
    next_line(&mut r, &mut line)?;
    if line.trim() != "ply" {
        return Err(parse_err(1, "missing `ply` magic"));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let ln = next_line(&mut r, &mut line)?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.first().copied() {
            Some("format") => {
                format = Some(match toks.get(1).copied() {
                    Some("ascii") => PlyFormat::Ascii,
                    Some("binary_little_endian") => PlyFormat::BinaryLittleEndian,
                    other => return Err(parse_err(ln, format!("unsupported PLY format {other:?}"))),
                })
            }
            Some("element") => {
                let name = toks.get(1).ok_or_else(|| parse_err(ln, "element without name"))?;
                let count = toks
                    .get(2)
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| parse_err(ln, "element without count"))?;
                elements.push(Element { name: name.to_string(), count, props: Vec::new() });
            }
            Some("property") => {
                let el = elements.last_mut().ok_or_else(|| parse_err(ln, "property before element"))?;
                let prop = if toks.get(1) == Some(&"list") {
                    let (Some(c), Some(t), Some(n)) = (
                        toks.get(2).and_then(|s| Scalar::parse(s)),
                        toks.get(3).and_then(|s| Scalar::parse(s)),
                        toks.get(4),
                    ) else {
                        return Err(parse_err(ln, "malformed list property"));
                    };
                    Property::List(n.to_string(), c, t)
                } else {
                    let (Some(t), Some(n)) = (toks.get(1).and_then(|s| Scalar::parse(s)), toks.get(2)) else {
                        return Err(parse_err(ln, "malformed property"));
                    };
                    Property::Scalar(n.to_string(), t)
                };
                el.props.push(prop);
            }
            Some("end_header") => break,
            Some("comment") | Some("obj_info") | None => {}
            Some(other) => return Err(parse_err(ln, format!("unknown header keyword `{other}`"))),
        }
    }
    let format = format.ok_or_else(|| parse_err(lineno, "missing format line"))?;
    let mut data = PlyData::default();
    let mut body_line = lineno;
    let mut ascii_tokens: Vec<String> = Vec::new();
    let mut tok_pos = 0;
    let mut rest = Vec::new();
    if format == PlyFormat::BinaryLittleEndian {
        r.read_to_end(&mut rest).map_err(|e| parse_err(body_line, e.to_string()))?;
    }
    let mut off = 0usize;
    let mut next_ascii = |r: &mut R, body_line: &mut usize| -> Result<f64> {
        while tok_pos >= ascii_tokens.len() {
            let mut l = String::new();
            *body_line += 1;
            if r.read_line(&mut l).map_err(|e| parse_err(*body_line, e.to_string()))? == 0 {
                return Err(parse_err(*body_line, "unexpected end of data"));
            }
            ascii_tokens = l.split_whitespace().map(str::to_string).collect();
            tok_pos = 0;
        }
        let t = &ascii_tokens[tok_pos];
        tok_pos += 1;
        t.parse::<f64>().map_err(|_| parse_err(*body_line, format!("bad number `{t}`")))
    };
    let mut next_bin = |t: Scalar| -> Result<f64> {
        let s = t.size();
        if off + s > rest.len() {
            return Err(parse_err(0, "binary PLY body is truncated"));
        }
        let v = t.read_le(&rest[off..off + s]);
        off += s;
        Ok(v)
    };
    for el in &elements {
        let is_vertex = el.name == "vertex";
        let is_face = el.name == "face";
        if is_vertex {
            data.vertex_props = el
                .props
                .iter()
                .filter_map(|p| match p {
                    Property::Scalar(n, _) => Some(n.clone()),
                    Property::List(..) => None,
                })
                .collect();
        }
        for _ in 0..el.count {
            let mut row = Vec::new();
            for p in &el.props {
                match *p {
                    Property::Scalar(_, t) => {
                        let v = match format {
                            PlyFormat::Ascii => next_ascii(&mut r, &mut body_line)?,
                            PlyFormat::BinaryLittleEndian => next_bin(t)?,
                        };
                        if is_vertex {
                            row.push(v);
                        }
                    }
                    Property::List(ref name, ct, t) => {
                        let n = match format {
                            PlyFormat::Ascii => next_ascii(&mut r, &mut body_line)?,
                            PlyFormat::BinaryLittleEndian => next_bin(ct)?,
                        } as usize;
                        let mut idx = Vec::with_capacity(n);
                        for _ in 0..n {
                            let v = match format {
                                PlyFormat::Ascii => next_ascii(&mut r, &mut body_line)?,
                                PlyFormat::BinaryLittleEndian => next_bin(t)?,
                            };
                            idx.push(v as usize);
                        }
                        if is_face && (name == "vertex_indices" || name == "vertex_index") {
                            data.faces.push(idx);
                        }
                    }
                }
            }
            if is_vertex {
                data.vertices.push(row);
            }
        }
    }
    Ok(data)
}

/// Reads a point cloud from PLY vertices (x, y, z and optional normals).
pub fn cloud_from_ply(data: &PlyData) -> Result<PointCloud<f64>> {
    let col = |n: &str| data.column(n);
    let (Some(x), Some(y), Some(z)) = (col("x"), col("y"), col("z")) else {
        return Err(Error::Input("PLY vertices lack x/y/z".into()));
    };
    let nrm = match (col("nx"), col("ny"), col("nz")) {
        (Some(a), Some(b), Some(c)) => Some((a, b, c)),
        _ => None,
    };
    let mut points = Vec::with_capacity(data.vertices.len());
    let mut normals = Vec::with_capacity(data.vertices.len());
    for (i, v) in data.vertices.iter().enumerate() {
        let p = P::new(v[x], v[y], v[z]);
        if !p.is_finite() {
            return Err(Error::Input(format!("vertex {i} has a non-finite coordinate")));
        }
        points.push(p);
        normals.push(nrm.map(|(a, b, c)| P::new(v[a], v[b], v[c])));
    }
    if points.is_empty() {
        return Err(Error::Input("no points in PLY input".into()));
    }
    finish_cloud(points, normals)
}

fn ply_header<W: Write>(
    w: &mut W,
    format: PlyFormat,
    n_vertices: usize,
    props: &[(&str, &str)],
    n_faces: Option<usize>,
) -> std::io::Result<()> {
    writeln!(w, "ply")?;
    match format {
        PlyFormat::Ascii => writeln!(w, "format ascii 1.0")?,
        PlyFormat::BinaryLittleEndian => writeln!(w, "format binary_little_endian 1.0")?,
    }
    writeln!(w, "element vertex {n_vertices}")?;
    for (t, n) in props {
        writeln!(w, "property {t} {n}")?;
    }
    if let Some(f) = n_faces {
        writeln!(w, "element face {f}")?;
        writeln!(w, "property list uchar int vertex_indices")?;
    }
    writeln!(w, "end_header")
}

/// Writes vertex rows of doubles plus optional triangle faces.
pub fn write_ply_rows<W: Write>(
    mut w: W,
    format: PlyFormat,
    names: &[&str],
    rows: &[Vec<f64>],
    faces: Option<&[[usize; 3]]>,
) -> std::io::Result<()> {
    let props: Vec<(&str, &str)> = names.iter().map(|n| ("double", *n)).collect();
    ply_header(&mut w, format, rows.len(), &props, faces.map(<[_]>::len))?;
    match format {
        PlyFormat::Ascii => {
            for r in rows {
                let s: Vec<String> = r.iter().map(|v| format!("{v}")).collect();
                writeln!(w, "{}", s.join(" "))?;
            }
            for f in faces.unwrap_or(&[]) {
                writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
            }
        }
        PlyFormat::BinaryLittleEndian => {
            for r in rows {
                for v in r {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
            for f in faces.unwrap_or(&[]) {
                w.write_all(&[3u8])?;
                for &i in f {
                    w.write_all(&(i as i32).to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}

pub fn write_cloud_ply<W: Write>(w: W, cloud: &PointCloud<f64>, format: PlyFormat) -> std::io::Result<()> {
    let rows: Vec<Vec<f64>> = cloud
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut r = vec![p.x, p.y, p.z];
            if let Some(n) = cloud.normals() {
                r.extend_from_slice(&n[i].to_array());
            }
            r
        })
        .collect();
    let names: &[&str] = if cloud.has_normals() { &["x", "y", "z", "nx", "ny", "nz"] } else { &["x", "y", "z"] };
    write_ply_rows(w, format, names, &rows, None)
}

fn is_ply(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("ply"))
}

/// Reads a cloud by extension: `.ply`, anything else as XYZ text.
pub fn read_cloud(path: &Path) -> Result<PointCloud<f64>> {
    let f = File::open(path).map_err(io_err(path))?;
    let r = BufReader::new(f);
    if is_ply(path) {
        cloud_from_ply(&read_ply(r)?)
    } else {
        read_xyz(r)
    }
}

pub fn write_cloud(path: &Path, cloud: &PointCloud<f64>) -> Result<()> {
    let f = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(f);
    if is_ply(path) {
        write_cloud_ply(&mut w, cloud, PlyFormat::BinaryLittleEndian)
    } else {
        write_xyz(&mut w, cloud)
    }
    .and_then(|_| w.flush())
    .map_err(io_err(path))
}

/// `id,lfs,provenance` rows.
pub fn write_field_csv<W: Write>(mut w: W, field: &ScalarField<f64>) -> std::io::Result<()> {
    writeln!(w, "id,lfs,provenance")?;
    for (i, v) in field.values.iter().enumerate() {
        writeln!(w, "{i},{v:.17e},{}", field.provenance[i].as_str())?;
    }
    Ok(())
}

/// Points with a per-vertex `lfs` scalar.
pub fn write_field_ply<W: Write>(w: W, points: &[P], field: &ScalarField<f64>) -> std::io::Result<()> {
    let rows: Vec<Vec<f64>> = points.iter().zip(&field.values).map(|(p, v)| vec![p.x, p.y, p.z, *v]).collect();
    write_ply_rows(w, PlyFormat::Ascii, &["x", "y", "z", "lfs"], &rows, None)
}

/// Vertices and polygon faces (fan-triangulated) from OBJ text.
pub fn read_obj<R: BufRead>(reader: R) -> Result<(Vec<P>, Vec<[usize; 3]>)> {
    let mut v = Vec::new();
    let mut f = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| parse_err(i + 1, e.to_string()))?;
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let c: Vec<f64> = toks
                    .take(3)
                    .map(|t| t.parse().map_err(|_| parse_err(i + 1, format!("bad number `{t}`"))))
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(parse_err(i + 1, "vertex needs 3 coordinates"));
                }
                v.push(P::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = toks
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        let k: i64 = head.parse().map_err(|_| parse_err(i + 1, format!("bad index `{t}`")))?;
                        let k = if k < 0 { v.len() as i64 + k } else { k - 1 };
                        if k < 0 {
                            return Err(parse_err(i + 1, format!("index `{t}` out of range")));
                        }
                        Ok(k as usize)
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(parse_err(i + 1, "face needs 3 vertices"));
                }
                for k in 1..idx.len() - 1 {
                    f.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    for (k, t) in f.iter().enumerate() {
        if t.iter().any(|&i| i >= v.len()) {
            return Err(Error::Input(format!("face {k} references a missing vertex")));
        }
    }
    Ok((v, f))
}

pub fn write_obj<W: Write>(mut w: W, vertices: &[P], faces: &[[usize; 3]]) -> std::io::Result<()> {
    for p in vertices {
        writeln!(w, "v {:.17e} {:.17e} {:.17e}", p.x, p.y, p.z)?;
    }
    for f in faces {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

/// Reads a triangle mesh by extension (`.ply` or `.obj`).
pub fn read_mesh_file(path: &Path) -> Result<(Vec<P>, Vec<[usize; 3]>)> {
    let f = File::open(path).map_err(io_err(path))?;
    let r = BufReader::new(f);
    if is_ply(path) {
        let d = read_ply(r)?;
        let cloud = cloud_from_ply(&d)?;
        let mut tris = Vec::new();
        for (k, face) in d.faces.iter().enumerate() {
            if face.len() < 3 || face.iter().any(|&i| i >= cloud.len()) {
                return Err(Error::Input(format!("face {k} is invalid")));
            }
            for j in 1..face.len() - 1 {
                tris.push([face[0], face[j], face[j + 1]]);
            }
        }
        Ok((cloud.points().to_vec(), tris))
    } else {
        read_obj(r)
    }
}

/// Writes a triangle mesh by extension (`.ply` binary or `.obj`).
pub fn write_mesh_file(path: &Path, vertices: &[P], faces: &[[usize; 3]]) -> Result<()> {
    let f = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(f);
    if is_ply(path) {
        let rows: Vec<Vec<f64>> = vertices.iter().map(|p| p.to_array().to_vec()).collect();
        write_ply_rows(&mut w, PlyFormat::BinaryLittleEndian, &["x", "y", "z"], &rows, Some(faces))
    } else {
        write_obj(&mut w, vertices, faces)
    }
    .and_then(|_| w.flush())
    .map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PointCloud<f64> {
        PointCloud::with_normals(
            vec![P::new(0.0, 1.0, 2.0), P::new(-1.5, 0.25, 3e-3)],
            Some(vec![P::new(0.0, 0.0, 1.0), P::new(1.0, 0.0, 0.0)]),
        )
        .unwrap()
    }

    #[test]
    fn xyz_round_trip_and_comments() {
        let mut buf = Vec::new();
        write_xyz(&mut buf, &sample()).unwrap();
        let back = read_xyz(&buf[..]).unwrap();
        assert_eq!(back.points(), sample().points());
        assert_eq!(back.normals(), sample().normals());
        let c = read_xyz("# header\n1 2 3 # trailing\n\n4 5 6\n".as_bytes()).unwrap();
        assert_eq!(c.len(), 2);
        assert!(!c.has_normals());
    }

    #[test]
    fn xyz_errors_carry_line_numbers() {
        match read_xyz("1 2 3\n1 2\n".as_bytes()) {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match read_xyz("1 2 x\n".as_bytes()) {
            Err(Error::Parse { line: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ply_round_trip_both_formats() {
        for fmt in [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian] {
            let mut buf = Vec::new();
            write_cloud_ply(&mut buf, &sample(), fmt).unwrap();
            let back = cloud_from_ply(&read_ply(&buf[..]).unwrap()).unwrap();
            assert_eq!(back.points(), sample().points());
            assert_eq!(back.normals(), sample().normals());
        }
    }

    #[test]
    fn ply_float_vertices_and_faces() {
        let mut buf = b"ply\nformat binary_little_endian 1.0\ncomment x\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar uint vertex_indices\nend_header\n".to_vec();
        for v in [0f32, 0., 0., 1., 0., 0., 0., 1., 0.] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.push(3);
        for i in [0u32, 1, 2] {
            buf.extend_from_slice(&i.to_le_bytes());
        }
        let d = read_ply(&buf[..]).unwrap();
        assert_eq!(d.vertices.len(), 3);
        assert_eq!(d.faces, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn obj_round_trip() {
        let v = vec![P::zero(), P::new(1.0, 0.0, 0.0), P::new(0.0, 1.0, 0.0), P::new(1.0, 1.0, 0.0)];
        let f = vec![[0, 1, 2], [1, 3, 2]];
        let mut buf = Vec::new();
        write_obj(&mut buf, &v, &f).unwrap();
        let (v2, f2) = read_obj(&buf[..]).unwrap();
        assert_eq!(v2, v);
        assert_eq!(f2, f);
        let (_, quad) = read_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1 2/2 3/3 4/4\n".as_bytes()).unwrap();
        assert_eq!(quad, vec![[0, 1, 2], [0, 2, 3]]);
    }
}
