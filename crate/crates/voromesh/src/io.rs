//! ASCII mesh formats and the plain-text artifacts of a run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use voromesh_core::mesh::{LoadReport, TriangleMesh};
use voromesh_core::optim::TraceRow;
use voromesh_core::DVec3;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{}: unsupported mesh format (expected .obj or .off)", path.display())]
    Format { path: PathBuf },
    #[error("{}: {source}", path.display())]
    Mesh { path: PathBuf, source: voromesh_core::Error },
}

impl IoError {
    fn parse(path: &Path, line: usize, message: impl Into<String>) -> IoError {
        IoError::Parse { path: path.to_path_buf(), line, message: message.into() }
    }
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}

/// Loads an OBJ or OFF file, chosen by extension. Polygons are fan-triangulated.
pub fn load_mesh(path: &Path) -> Result<(TriangleMesh, LoadReport), IoError> {
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    let (vertices, faces) = match ext.as_deref() {
        Some("obj") => parse_obj(&read_text(path)?, path)?,
        Some("off") => parse_off(&read_text(path)?, path)?,
        _ => return Err(IoError::Format { path: path.to_path_buf() }),
    };
    TriangleMesh::from_polygons(vertices, &faces).map_err(|source| IoError::Mesh { path: path.to_path_buf(), source })
}

fn parse_f64(tok: Option<&str>, path: &Path, line: usize, what: &str) -> Result<f64, IoError> {
    let tok = tok.ok_or_else(|| IoError::parse(path, line, format!("missing {what}")))?;
    let v: f64 = tok.parse().map_err(|_| IoError::parse(path, line, format!("invalid {what} `{tok}`")))?;
    if !v.is_finite() {
        return Err(IoError::parse(path, line, format!("non-finite {what} `{tok}`")));
    }
    Ok(v)
}

/// Vertices and polygon faces (0-based) of an OBJ document. Only `v` and
/// `f` records are read; `a/b/c` references use their position index.
pub fn parse_obj(text: &str, path: &Path) -> Result<(Vec<DVec3>, Vec<Vec<u32>>), IoError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let mut toks = raw.split('#').next().unwrap_or("").split_whitespace();
        match toks.next() {
            Some("v") => {
                let x = parse_f64(toks.next(), path, line, "x coordinate")?;
                let y = parse_f64(toks.next(), path, line, "y coordinate")?;
                let z = parse_f64(toks.next(), path, line, "z coordinate")?;
                vertices.push(DVec3::new(x, y, z));
            }
            Some("f") => {
                let mut face = Vec::new();
                for tok in toks {
                    let head = tok.split('/').next().unwrap_or("");
                    let i: i64 =
                        head.parse().map_err(|_| IoError::parse(path, line, format!("invalid face index `{tok}`")))?;
                    let count = vertices.len() as i64;
                    let idx = if i > 0 { i - 1 } else { count + i };
                    if i == 0 || idx < 0 || idx >= count {
                        return Err(IoError::parse(
                            path,
                            line,
                            format!("face index {i} out of range ({count} vertices defined so far)"),
                        ));
                    }
                    face.push(idx as u32);
                }
                if face.len() < 3 {
                    return Err(IoError::parse(path, line, "face with fewer than 3 vertices"));
                }
                faces.push(face);
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

struct Tokens<'a> {
    toks: Vec<(usize, &'a str)>,
    pos: usize,
    path: &'a Path,
    last_line: usize,
}

impl<'a> Tokens<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str), IoError> {
        let t = self.toks.get(self.pos).copied().ok_or_else(|| {
            IoError::parse(self.path, self.last_line, format!("unexpected end of file, expected {what}"))
        })?;
        self.pos += 1;
        Ok(t)
    }

    fn number<T: std::str::FromStr>(&mut self, what: &str) -> Result<(usize, T), IoError> {
        let (line, tok) = self.next(what)?;
        let v = tok.parse().map_err(|_| IoError::parse(self.path, line, format!("invalid {what} `{tok}`")))?;
        Ok((line, v))
    }

    fn skip_rest_of_line(&mut self, line: usize) {
        while self.toks.get(self.pos).is_some_and(|t| t.0 == line) {
            self.pos += 1;
        }
    }
}

/// Vertices and polygon faces of an OFF document. Trailing per-face color
/// values are ignored.
pub fn parse_off(text: &str, path: &Path) -> Result<(Vec<DVec3>, Vec<Vec<u32>>), IoError> {
    let mut toks: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .flat_map(|(n, raw)| raw.split('#').next().unwrap_or("").split_whitespace().map(move |t| (n + 1, t)))
        .collect();
    let last_line = text.lines().count().max(1);
    match toks.first() {
        Some(&(_, "OFF")) => {
            toks.remove(0);
        }
        Some(&(line, head)) => match head.strip_prefix("OFF") {
            // "OFF8 6 0" style header without a separating space
            Some(rest) if rest.chars().all(|c| c.is_ascii_digit()) && !rest.is_empty() => toks[0] = (line, rest),
            _ => return Err(IoError::parse(path, line, format!("expected `OFF` header, found `{head}`"))),
        },
        None => return Err(IoError::parse(path, last_line, "empty file")),
    }
    let mut t = Tokens { toks, pos: 0, path, last_line };
    let (_, nv) = t.number::<usize>("vertex count")?;
    let (_, nf) = t.number::<usize>("face count")?;
    let (line, _) = t.number::<usize>("edge count")?;
    t.skip_rest_of_line(line);

    let mut vertices = Vec::with_capacity(nv.min(1 << 24));
    for _ in 0..nv {
        let mut c = [0.0; 3];
        let mut line = 0;
        for v in &mut c {
            let (l, tok) = t.next("vertex coordinate")?;
            *v = parse_f64(Some(tok), path, l, "vertex coordinate")?;
            line = l;
        }
        t.skip_rest_of_line(line);
        vertices.push(DVec3::from(c));
    }
    let mut faces = Vec::with_capacity(nf.min(1 << 24));
    for _ in 0..nf {
        let (line, k) = t.number::<usize>("face size")?;
        if k < 3 {
            return Err(IoError::parse(path, line, "face with fewer than 3 vertices"));
        }
        let mut face = Vec::with_capacity(k);
        let mut last = line;
        for _ in 0..k {
            let (l, i) = t.number::<usize>("face index")?;
            if i >= nv {
                return Err(IoError::parse(path, l, format!("face index {i} out of range ({nv} vertices)")));
            }
            face.push(i as u32);
            last = l;
        }
        t.skip_rest_of_line(last);
        faces.push(face);
    }
    Ok((vertices, faces))
}

/// Formats `x` with 9 significant digits, switching to exponent notation
/// for very large or small magnitudes.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..9).contains(&exp) {
        trim(&format!("{:.*}", (8 - exp) as usize, x))
    } else {
        format!("{}e{exp}", trim(mantissa))
    }
}

/// Polygonal OBJ text with 1-based indices.
pub fn format_obj(vertices: &[DVec3], faces: &[Vec<u32>]) -> String {
    let mut out = String::with_capacity(vertices.len() * 40 + faces.len() * 30);
    for v in vertices {
        let _ = writeln!(out, "v {} {} {}", format_sig9(v.x), format_sig9(v.y), format_sig9(v.z));
    }
    for f in faces {
        out.push('f');
        for &i in f {
            let _ = write!(out, " {}", i + 1);
        }
        out.push('\n');
    }
    out
}

pub fn save_polygon_mesh(path: &Path, vertices: &[DVec3], faces: &[Vec<u32>]) -> Result<(), IoError> {
    write_text(path, &format_obj(vertices, faces))
}

/// One generator per line: `x y z occupancy` with occupancy `1` or `0`.
pub fn format_generators(positions: &[DVec3], occupancy: &[bool]) -> String {
    let mut out = String::from("# x y z occupancy\n");
    for (p, &o) in positions.iter().zip(occupancy) {
        let _ = writeln!(out, "{:.17e} {:.17e} {:.17e} {}", p.x, p.y, p.z, u8::from(o));
    }
    out
}

/// One generator per line: `x y z`.
pub fn format_generators_only(positions: &[DVec3]) -> String {
    let mut out = String::from("# x y z\n");
    for p in positions {
        let _ = writeln!(out, "{:.17e} {:.17e} {:.17e}", p.x, p.y, p.z);
    }
    out
}

/// Reads a generator file; the occupancy column is optional for all lines at once.
pub fn parse_generators(text: &str, path: &Path) -> Result<(Vec<DVec3>, Option<Vec<bool>>), IoError> {
    let mut positions = Vec::new();
    let mut occupancy = Vec::new();
    let mut with_occupancy = None;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let toks: Vec<&str> = raw.split('#').next().unwrap_or("").split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() != 3 && toks.len() != 4 {
            return Err(IoError::parse(path, line, format!("expected `x y z [occupancy]`, found {} fields", toks.len())));
        }
        let has = toks.len() == 4;
        if *with_occupancy.get_or_insert(has) != has {
            return Err(IoError::parse(path, line, "occupancy column present on some lines only"));
        }
        let c: Vec<f64> = (0..3)
            .map(|i| parse_f64(Some(toks[i]), path, line, "coordinate"))
            .collect::<Result<_, _>>()?;
        positions.push(DVec3::new(c[0], c[1], c[2]));
        if has {
            occupancy.push(match toks[3] {
                "1" => true,
                "0" => false,
                other => return Err(IoError::parse(path, line, format!("occupancy must be 0 or 1, found `{other}`"))),
            });
        }
    }
    Ok((positions, with_occupancy.unwrap_or(false).then_some(occupancy)))
}

pub fn format_trace_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("step,lr,minibatch_loss,full_loss\n");
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.9e}")).unwrap_or_default();
    for r in trace {
        let _ = writeln!(out, "{},{:e},{},{}", r.step, r.lr, opt(r.minibatch_loss), opt(r.full_loss));
    }
    out
}

/// Points with normals, one `x y z nx ny nz` per line.
pub fn format_xyz(points: &[DVec3], normals: &[DVec3]) -> String {
    let mut out = String::with_capacity(points.len() * 80);
    for (p, n) in points.iter().zip(normals) {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {}",
            format_sig9(p.x),
            format_sig9(p.y),
            format_sig9(p.z),
            format_sig9(n.x),
            format_sig9(n.y),
            format_sig9(n.z)
        );
    }
    out
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable report");
    text.push('\n');
    write_text(path, &text)
}
