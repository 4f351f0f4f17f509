//! Target point clouds: PLY ingest and export, normalization into unit
//! scale, and component labelling.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{centroid, Vec3};
use crate::refine::NeighborGraph;
use crate::trajectory::bbox_diagonal;

pub const DEFAULT_COLOR: [f64; 3] = [0.5, 0.5, 0.5];
/// Default splat radius as a fraction of the bounding-box diagonal.
pub const DEFAULT_RADIUS_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct TargetCloud {
    pub positions: Vec<Vec3>,
    pub colors: Vec<[f64; 3]>,
    pub labels: Vec<usize>,
    pub radii: Vec<f64>,
}

impl TargetCloud {
    pub fn new(positions: Vec<Vec3>, colors: Vec<[f64; 3]>, labels: Vec<usize>, radii: Vec<f64>) -> Result<Self> {
        let n = positions.len();
        if colors.len() != n || labels.len() != n || radii.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{n} positions, {} colors, {} labels, {} radii",
                colors.len(),
                labels.len(),
                radii.len()
            )));
        }
        if let Some(i) = positions.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidParameter(format!("non-finite position at point {i}")));
        }
        if let Some(i) = radii.iter().position(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "point {i} has non-positive radius {}",
                radii[i]
            )));
        }
        if let Some(i) = colors.iter().position(|c| !c.iter().all(|v| (0.0..=1.0).contains(v))) {
            return Err(Error::InvalidParameter(format!("point {i} has a color outside [0, 1]")));
        }
        check_dense(&labels)?;
        Ok(Self {
            positions,
            colors,
            labels,
            radii,
        })
    }

    /// Cloud with default gray color, label 0, and radius 1% of the bounding-box diagonal.
    pub fn from_positions(positions: Vec<Vec3>) -> Result<Self> {
        let n = positions.len();
        let radius = default_radius(&positions);
        Self::new(positions, vec![DEFAULT_COLOR; n], vec![0; n], vec![radius; n])
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn component_count(&self) -> usize {
        self.labels.iter().max().map_or(0, |&m| m + 1)
    }

    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Self> {
        Self::new(self.positions.clone(), self.colors.clone(), labels, self.radii.clone())
    }
}

fn default_radius(positions: &[Vec3]) -> f64 {
    let diag = bbox_diagonal(positions);
    if diag > 0.0 {
        DEFAULT_RADIUS_FRACTION * diag
    } else {
        DEFAULT_RADIUS_FRACTION
    }
}

fn check_dense(labels: &[usize]) -> Result<()> {
    let count = labels.iter().max().map_or(0, |&m| m + 1);
    let mut seen = vec![false; count];
    for &l in labels {
        seen[l] = true;
    }
    match seen.iter().position(|s| !s) {
        Some(missing) => Err(Error::InvalidParameter(format!(
            "component labels must be dense in [0, {count}); label {missing} is unused"
        ))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone)]
pub struct LoadedCloud {
    pub cloud: TargetCloud,
    /// Vertex properties that were present but ignored.
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Encoding {
    Ascii,
    BinaryLittleEndian,
}

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
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
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

    fn is_integer(self) -> bool {
        !matches!(self, Scalar::F32 | Scalar::F64)
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum PropertyKind {
    Scalar(Scalar),
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    kind: PropertyKind,
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

#[derive(Debug, Default, Clone, Copy)]
struct VertexLayout {
    x: Option<usize>,
    y: Option<usize>,
    z: Option<usize>,
    red: Option<usize>,
    green: Option<usize>,
    blue: Option<usize>,
    label: Option<usize>,
    radius: Option<usize>,
}

struct Header {
    encoding: Encoding,
    elements: Vec<Element>,
    /// Byte offset of the first data byte.
    data_start: usize,
    /// Number of header lines, so ascii data line numbers can be reported.
    lines: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut pos = 0;
    let mut line_no = 0;
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let Some(end) = bytes[pos..].iter().position(|&b| b == b'\n') else {
            return Err(Error::parse(
                format!("line {}", line_no + 1),
                "header is not terminated by end_header",
            ));
        };
        let raw = &bytes[pos..pos + end];
        pos += end + 1;
        line_no += 1;
        let loc = format!("line {line_no}");
        let line = std::str::from_utf8(raw)
            .map_err(|_| Error::parse(&loc, "header line is not valid UTF-8"))?
            .trim_end_matches('\r');
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if line_no == 1 {
            if tokens != ["ply"] {
                return Err(Error::parse(loc, "missing 'ply' magic"));
            }
            continue;
        }
        match tokens.as_slice() {
            ["format", fmt, _version] => {
                encoding = Some(match *fmt {
                    "ascii" => Encoding::Ascii,
                    "binary_little_endian" => Encoding::BinaryLittleEndian,
                    other => return Err(Error::parse(loc, format!("unsupported format '{other}'"))),
                });
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| Error::parse(&loc, format!("invalid element count '{count}'")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            ["property", "list", count, item, name] => {
                let (Some(count), Some(item)) = (Scalar::parse(count), Scalar::parse(item)) else {
                    return Err(Error::parse(loc, format!("unknown list property types in '{line}'")));
                };
                let Some(el) = elements.last_mut() else {
                    return Err(Error::parse(loc, "property declared before any element"));
                };
                el.properties.push(Property {
                    name: name.to_string(),
                    kind: PropertyKind::List { count, item },
                });
            }
            ["property", ty, name] => {
                let Some(ty) = Scalar::parse(ty) else {
                    return Err(Error::parse(loc, format!("unknown property type '{ty}'")));
                };
                let Some(el) = elements.last_mut() else {
                    return Err(Error::parse(loc, "property declared before any element"));
                };
                el.properties.push(Property {
                    name: name.to_string(),
                    kind: PropertyKind::Scalar(ty),
                });
            }
            ["end_header"] => break,
            _ => return Err(Error::parse(loc, format!("unrecognized header line '{line}'"))),
        }
    }
    let encoding = encoding.ok_or_else(|| Error::parse("header", "missing format line"))?;
    Ok(Header {
        encoding,
        elements,
        data_start: pos,
        lines: line_no,
    })
}

/// Loads a PLY point cloud (ascii or binary little-endian).
///
/// Reads `x`, `y`, `z` and the optional `red`, `green`, `blue`, `label` and
/// `radius` vertex properties. Integer color channels are scaled by 1/255.
/// Other elements (faces, edges) are skipped.
pub fn load_cloud(path: impl AsRef<Path>) -> Result<LoadedCloud> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ply(&bytes)
}

pub fn parse_ply(bytes: &[u8]) -> Result<LoadedCloud> {
    let header = parse_header(bytes)?;
    let vertex_idx = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| Error::parse("header", "no vertex element"))?;

    let vertex = &header.elements[vertex_idx];
    let mut layout = VertexLayout::default();
    let mut warnings = Vec::new();
    for (i, p) in vertex.properties.iter().enumerate() {
        let slot = match p.name.as_str() {
            "x" => &mut layout.x,
            "y" => &mut layout.y,
            "z" => &mut layout.z,
            "red" => &mut layout.red,
            "green" => &mut layout.green,
            "blue" => &mut layout.blue,
            "label" => &mut layout.label,
            "radius" => &mut layout.radius,
            other => {
                warnings.push(format!("unsupported vertex property '{other}' ignored"));
                continue;
            }
        };
        if matches!(p.kind, PropertyKind::List { .. }) {
            return Err(Error::parse(
                "header",
                format!("vertex property '{}' must be a scalar", p.name),
            ));
        }
        *slot = Some(i);
    }
    if layout.x.is_none() || layout.y.is_none() || layout.z.is_none() {
        return Err(Error::parse("header", "vertex element needs x, y and z properties"));
    }
    let has_color = [layout.red, layout.green, layout.blue];
    if has_color.iter().any(Option::is_some) && !has_color.iter().all(Option::is_some) {
        return Err(Error::parse("header", "red, green and blue must be given together"));
    }

    let rows = match header.encoding {
        Encoding::Ascii => read_ascii(bytes, &header, vertex_idx)?,
        Encoding::BinaryLittleEndian => read_binary(bytes, &header, vertex_idx)?,
    };

    let scalar_type = |i: Option<usize>| match i.map(|i| &vertex.properties[i].kind) {
        Some(PropertyKind::Scalar(s)) => Some(*s),
        _ => None,
    };
    let color_integer = scalar_type(layout.red).is_some_and(Scalar::is_integer);

    let n = rows.len();
    let mut positions = Vec::with_capacity(n);
    let mut colors = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut radii = Vec::with_capacity(n);
    for (row_idx, row) in rows.iter().enumerate() {
        let get = |i: Option<usize>| i.map(|i| row[i]);
        positions.push(Vec3::new(
            row[layout.x.unwrap()],
            row[layout.y.unwrap()],
            row[layout.z.unwrap()],
        ));
        colors.push(match (get(layout.red), get(layout.green), get(layout.blue)) {
            (Some(r), Some(g), Some(b)) if color_integer => [r, g, b].map(|c| (c / 255.0).clamp(0.0, 1.0)),
            (Some(r), Some(g), Some(b)) => [r, g, b].map(|c| c.clamp(0.0, 1.0)),
            _ => DEFAULT_COLOR,
        });
        labels.push(match get(layout.label) {
            Some(l) if l >= 0.0 && l.fract() == 0.0 => l as usize,
            Some(l) => return Err(Error::parse(format!("vertex {row_idx}"), format!("invalid label {l}"))),
            None => 0,
        });
        if let Some(r) = get(layout.radius) {
            radii.push(r);
        }
    }
    if radii.is_empty() {
        radii = vec![default_radius(&positions); n];
    }
    Ok(LoadedCloud {
        cloud: TargetCloud::new(positions, colors, labels, radii)?,
        warnings,
    })
}

fn read_ascii(bytes: &[u8], header: &Header, vertex_idx: usize) -> Result<Vec<Vec<f64>>> {
    let text = std::str::from_utf8(&bytes[header.data_start..])
        .map_err(|_| Error::parse(format!("line {}", header.lines + 1), "ascii body is not valid UTF-8"))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (header.lines + 1 + i, l));
    let mut rows = Vec::new();
    for (e_idx, el) in header.elements.iter().enumerate() {
        for _ in 0..el.count {
            let Some((line_no, line)) = lines.next() else {
                return Err(Error::parse(
                    format!("line {}", header.lines + 1),
                    format!("unexpected end of file in element '{}'", el.name),
                ));
            };
            if e_idx != vertex_idx {
                continue;
            }
            let loc = format!("line {line_no}");
            let mut tokens = line.split_whitespace();
            let mut next = |what: &str| -> Result<f64> {
                let tok = tokens
                    .next()
                    .ok_or_else(|| Error::parse(&loc, format!("missing value for '{what}'")))?;
                tok.parse::<f64>()
                    .map_err(|_| Error::parse(&loc, format!("invalid number '{tok}' for '{what}'")))
            };
            let mut row = Vec::with_capacity(el.properties.len());
            for p in &el.properties {
                match p.kind {
                    PropertyKind::Scalar(_) => row.push(next(&p.name)?),
                    PropertyKind::List { .. } => {
                        let count = next(&p.name)? as usize;
                        for _ in 0..count {
                            next(&p.name)?;
                        }
                        row.push(f64::NAN);
                    }
                }
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

fn read_binary(bytes: &[u8], header: &Header, vertex_idx: usize) -> Result<Vec<Vec<f64>>> {
    let mut pos = header.data_start;
    let mut take = |size: usize| -> Result<&[u8]> {
        if pos + size > bytes.len() {
            return Err(Error::parse(
                format!("byte offset {pos}"),
                "unexpected end of binary data",
            ));
        }
        let s = &bytes[pos..pos + size];
        pos += size;
        Ok(s)
    };
    let mut rows = Vec::new();
    for (e_idx, el) in header.elements.iter().enumerate() {
        for _ in 0..el.count {
            let mut row = Vec::with_capacity(el.properties.len());
            for p in &el.properties {
                match p.kind {
                    PropertyKind::Scalar(s) => row.push(s.read_le(take(s.size())?)),
                    PropertyKind::List { count, item } => {
                        let n = count.read_le(take(count.size())?) as usize;
                        take(n * item.size())?;
                        row.push(f64::NAN);
                    }
                }
            }
            if e_idx == vertex_idx {
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlyEncoding {
    #[default]
    Ascii,
    BinaryLittleEndian,
}

/// Writes every supported property; positions, colors and radii as `double`.
pub fn write_ply(cloud: &TargetCloud, encoding: PlyEncoding) -> Vec<u8> {
    let mut out = Vec::new();
    let format = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
    };
    out.extend_from_slice(format!("ply\nformat {format} 1.0\nelement vertex {}\n", cloud.len()).as_bytes());
    for name in ["x", "y", "z", "red", "green", "blue"] {
        out.extend_from_slice(format!("property double {name}\n").as_bytes());
    }
    out.extend_from_slice(b"property int label\nproperty double radius\nend_header\n");
    for i in 0..cloud.len() {
        let p = cloud.positions[i];
        let c = cloud.colors[i];
        let doubles = [p.x, p.y, p.z, c[0], c[1], c[2]];
        match encoding {
            PlyEncoding::Ascii => {
                let mut line = doubles.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" ");
                line.push_str(&format!(" {} {:?}\n", cloud.labels[i], cloud.radii[i]));
                out.extend_from_slice(line.as_bytes());
            }
            PlyEncoding::BinaryLittleEndian => {
                for v in doubles {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                out.extend_from_slice(&(cloud.labels[i] as i32).to_le_bytes());
                out.extend_from_slice(&cloud.radii[i].to_le_bytes());
            }
        }
    }
    out
}

pub fn save_cloud(path: impl AsRef<Path>, cloud: &TargetCloud, encoding: PlyEncoding) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&write_ply(cloud, encoding)).map_err(|e| Error::io(path, e))
}

/// A cloud moved to the origin and scaled to unit bounding-box diagonal,
/// with the parameters needed to map results back.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedCloud {
    pub cloud: TargetCloud,
    pub scale: f64,
    pub offset: Vec3,
}

impl NormalizedCloud {
    pub fn denormalize_point(&self, p: &Vec3) -> Vec3 {
        p / self.scale + self.offset
    }

    pub fn denormalize_vector(&self, v: &Vec3) -> Vec3 {
        v / self.scale
    }

    pub fn denormalize(&self) -> TargetCloud {
        TargetCloud {
            positions: self.cloud.positions.iter().map(|p| self.denormalize_point(p)).collect(),
            radii: self.cloud.radii.iter().map(|r| r / self.scale).collect(),
            ..self.cloud.clone()
        }
    }
}

pub fn normalize_cloud(cloud: &TargetCloud) -> Result<NormalizedCloud> {
    if cloud.len() < 2 {
        return Err(Error::EmptyCloud {
            required: 2,
            found: cloud.len(),
        });
    }
    let diag = bbox_diagonal(&cloud.positions);
    if diag.is_nan() || diag <= 0.0 {
        return Err(Error::DegenerateCloud);
    }
    let offset = centroid(&cloud.positions);
    let scale = 1.0 / diag;
    let normalized = TargetCloud {
        positions: cloud.positions.iter().map(|p| (p - offset) * scale).collect(),
        radii: cloud.radii.iter().map(|r| r * scale).collect(),
        ..cloud.clone()
    };
    Ok(NormalizedCloud {
        cloud: normalized,
        scale,
        offset,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ComponentAssignment {
    pub labels: Vec<usize>,
    pub names: Vec<String>,
}

pub enum LabelSource<'a> {
    Explicit(ComponentAssignment),
    /// `(point index, component)` seeds; every point takes the component of
    /// the seed nearest to it along the graph (edge length = Euclidean distance).
    Seeds {
        seeds: &'a [(usize, usize)],
        graph: &'a NeighborGraph,
    },
}

pub fn assign_labels(cloud: &TargetCloud, source: LabelSource<'_>) -> Result<TargetCloud> {
    match source {
        LabelSource::Explicit(assignment) => {
            if assignment.labels.len() != cloud.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} labels for {} points",
                    assignment.labels.len(),
                    cloud.len()
                )));
            }
            cloud.with_labels(assignment.labels)
        }
        LabelSource::Seeds { seeds, graph } => {
            if graph.len() != cloud.len() {
                return Err(Error::DimensionMismatch(format!(
                    "graph over {} points, cloud has {}",
                    graph.len(),
                    cloud.len()
                )));
            }
            cloud.with_labels(geodesic_labels(&cloud.positions, seeds, graph)?)
        }
    }
}

#[derive(PartialEq)]
struct Frontier {
    dist: f64,
    seed_rank: usize,
    node: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed for a min-heap.
        other
            .dist
            .total_cmp(&self.dist)
            .then(other.seed_rank.cmp(&self.seed_rank))
            .then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Multi-source Dijkstra; ties go to the earlier seed. Points unreachable
/// from every seed take the Euclidean-nearest seed's component.
fn geodesic_labels(positions: &[Vec3], seeds: &[(usize, usize)], graph: &NeighborGraph) -> Result<Vec<usize>> {
    let n = positions.len();
    if seeds.is_empty() {
        return Err(Error::InvalidParameter(
            "seed-based labelling needs at least one seed".into(),
        ));
    }
    if let Some(&(index, _)) = seeds.iter().find(|(i, _)| *i >= n) {
        return Err(Error::InvalidSeed { index, points: n });
    }
    let mut best: Vec<Option<(f64, usize)>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    for (rank, &(node, _)) in seeds.iter().enumerate() {
        heap.push(Frontier {
            dist: 0.0,
            seed_rank: rank,
            node,
        });
    }
    while let Some(Frontier { dist, seed_rank, node }) = heap.pop() {
        if best[node].is_some() {
            continue;
        }
        best[node] = Some((dist, seed_rank));
        for &j in graph.neighbors(node) {
            let j = j as usize;
            if best[j].is_none() {
                heap.push(Frontier {
                    dist: dist + (positions[j] - positions[node]).norm(),
                    seed_rank,
                    node: j,
                });
            }
        }
    }
    Ok((0..n)
        .map(|i| {
            let rank = best[i].map(|(_, r)| r).unwrap_or_else(|| {
                (0..seeds.len())
                    .min_by(|&a, &b| {
                        let da = (positions[seeds[a].0] - positions[i]).norm_squared();
                        let db = (positions[seeds[b].0] - positions[i]).norm_squared();
                        da.total_cmp(&db).then(a.cmp(&b))
                    })
                    .unwrap()
            });
            seeds[rank].1
        })
        .collect())
}
