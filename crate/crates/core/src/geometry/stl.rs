//! Binary and ASCII STL decoding.

use super::mesh::{Triangle, TriangleMesh};
use crate::error::{Error, Result};

const HEADER_LEN: usize = 80;
const RECORD_LEN: usize = 50;

/// Decodes a binary or ASCII STL. Vertices keep single-float precision.
///
/// A buffer whose length equals `84 + 50·count` for its declared count is
/// binary; otherwise a leading `solid` keyword selects the ASCII grammar.
pub fn parse_stl(id: &str, bytes: &[u8]) -> Result<TriangleMesh> {
    if bytes.len() >= HEADER_LEN + 4 {
        let declared = declared_count(bytes);
        if HEADER_LEN + 4 + declared * RECORD_LEN == bytes.len() {
            return parse_binary(id, bytes);
        }
    }
    let trimmed = bytes
        .iter()
        .position(|b| !b.is_ascii_whitespace())
        .map_or(&bytes[..0], |i| &bytes[i..]);
    if trimmed.starts_with(b"solid") && std::str::from_utf8(bytes).is_ok() {
        return parse_ascii(id, std::str::from_utf8(bytes).expect("checked utf-8"));
    }
    parse_binary(id, bytes)
}

fn declared_count(bytes: &[u8]) -> usize {
    u32::from_le_bytes(bytes[HEADER_LEN..HEADER_LEN + 4].try_into().expect("4 bytes")) as usize
}

fn parse_binary(id: &str, bytes: &[u8]) -> Result<TriangleMesh> {
    if bytes.len() < HEADER_LEN + 4 {
        return Err(Error::data(format!(
            "binary STL truncated at byte offset {}: header needs {} bytes",
            bytes.len(),
            HEADER_LEN + 4
        )));
    }
    let count = declared_count(bytes);
    let available = (bytes.len() - HEADER_LEN - 4) / RECORD_LEN;
    if available < count {
        let offset = HEADER_LEN + 4 + available * RECORD_LEN;
        return Err(Error::data(format!(
            "binary STL truncated at byte offset {offset}: declares {count} triangles, bytes for {available}"
        )));
    }
    if available > count || !(bytes.len() - HEADER_LEN - 4).is_multiple_of(RECORD_LEN) {
        let offset = HEADER_LEN + 4 + count * RECORD_LEN;
        return Err(Error::data(format!(
            "binary STL has trailing bytes at byte offset {offset}: declares {count} triangles"
        )));
    }
    let f = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as f64;
    let triangles: Vec<Triangle> = (0..count)
        .map(|i| {
            // 12 bytes of normal precede the vertices.
            let base = HEADER_LEN + 4 + i * RECORD_LEN + 12;
            std::array::from_fn(|v| std::array::from_fn(|a| f(base + v * 12 + a * 4)))
        })
        .collect();
    TriangleMesh::new(id, triangles)
}

fn parse_ascii(id: &str, text: &str) -> Result<TriangleMesh> {
    let mut tokens = text
        .lines()
        .enumerate()
        .flat_map(|(n, line)| line.split_whitespace().map(move |t| (n + 1, t)));
    let mut last_line = 1;
    let mut next = |what: &str| -> Result<(usize, &str)> {
        match tokens.next() {
            Some(t) => {
                last_line = t.0;
                Ok(t)
            }
            None => Err(Error::data(format!(
                "ASCII STL ended early at line {last_line}: expected {what}"
            ))),
        }
    };
    let expect = |(line, tok): (usize, &str), want: &str| -> Result<()> {
        if tok == want {
            Ok(())
        } else {
            Err(Error::data(format!(
                "ASCII STL line {line}: expected '{want}', found '{tok}'"
            )))
        }
    };
    let number = |(line, tok): (usize, &str)| -> Result<f64> {
        tok.parse::<f32>()
            .map(f64::from)
            .map_err(|_| Error::data(format!("ASCII STL line {line}: '{tok}' is not a number")))
    };

    expect(next("solid")?, "solid")?;
    let mut triangles = Vec::new();
    // The solid name is optional and may span several tokens.
    let mut tok = next("facet")?;
    while tok.1 != "facet" && tok.1 != "endsolid" {
        tok = next("facet")?;
    }
    loop {
        match tok.1 {
            "endsolid" => break,
            "facet" => {}
            other => {
                return Err(Error::data(format!(
                    "ASCII STL line {}: expected 'facet' or 'endsolid', found '{other}'",
                    tok.0
                )))
            }
        }
        expect(next("normal")?, "normal")?;
        for _ in 0..3 {
            number(next("normal component")?)?;
        }
        expect(next("outer")?, "outer")?;
        expect(next("loop")?, "loop")?;
        let mut tri: Triangle = [[0.0; 3]; 3];
        for v in tri.iter_mut() {
            expect(next("vertex")?, "vertex")?;
            for c in v.iter_mut() {
                *c = number(next("vertex coordinate")?)?;
            }
        }
        expect(next("endloop")?, "endloop")?;
        expect(next("endfacet")?, "endfacet")?;
        triangles.push(tri);
        tok = next("facet or endsolid")?;
    }
    if triangles.is_empty() {
        return Err(Error::data(format!("ASCII STL line {}: solid has no facets", tok.0)));
    }
    TriangleMesh::new(id, triangles)
}

/// Encodes a mesh as binary STL with zero normals.
pub fn to_binary_stl(mesh: &TriangleMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 + mesh.len() * RECORD_LEN);
    let mut header = [b' '; HEADER_LEN];
    let tag = b"binary STL";
    header[..tag.len()].copy_from_slice(tag);
    out.extend_from_slice(&header);
    out.extend_from_slice(&(mesh.len() as u32).to_le_bytes());
    for tri in mesh.triangles() {
        out.extend_from_slice(&[0u8; 12]);
        for v in tri {
            for c in v {
                out.extend_from_slice(&(*c as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&[0u8; 2]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRI: Triangle = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];

    #[test]
    fn binary_single_triangle() {
        let mesh = TriangleMesh::new("t", vec![TRI]).unwrap();
        let bytes = to_binary_stl(&mesh);
        assert_eq!(bytes.len(), 134);
        let parsed = parse_stl("t", &bytes).unwrap();
        assert_eq!(parsed.triangles(), &[TRI]);
    }

    #[test]
    fn ascii_matches_binary() {
        let text = "solid demo part\n  facet normal 0 0 1\n    outer loop\n      vertex 0 0 0\n      vertex 1 0 0\n      vertex 0 1 0\n    endloop\n  endfacet\nendsolid demo part\n";
        let parsed = parse_stl("t", text.as_bytes()).unwrap();
        assert_eq!(parsed.triangles(), &[TRI]);
    }

    #[test]
    fn declared_count_beyond_bytes_reports_offset() {
        let mesh = TriangleMesh::new("t", vec![TRI]).unwrap();
        let mut bytes = to_binary_stl(&mesh);
        bytes[80..84].copy_from_slice(&2u32.to_le_bytes());
        match parse_stl("t", &bytes) {
            Err(Error::Data(msg)) => assert!(msg.contains("offset 134"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn short_header_is_truncation() {
        assert!(matches!(parse_stl("t", &[0u8; 40]), Err(Error::Data(_))));
    }

    #[test]
    fn ascii_grammar_errors_name_the_line() {
        let text = "solid x\nfacet normal 0 0 1\nouter loop\nvertex 0 0 0\nvertex 1 0\nendloop\nendfacet\nendsolid\n";
        match parse_stl("t", text.as_bytes()) {
            Err(Error::Data(msg)) => assert!(msg.contains("line 6"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
        let text = "solid x\nfacet normal 0 0 1\nouter loop\nvertex 0 0 0\n";
        assert!(matches!(parse_stl("t", text.as_bytes()), Err(Error::Data(_))));
    }

    #[test]
    fn single_precision_round_trip() {
        let tri = [[0.1, 1e3 + 0.3, -2.7], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let mesh = TriangleMesh::new("t", vec![tri]).unwrap();
        let parsed = parse_stl("t", &to_binary_stl(&mesh)).unwrap();
        assert_eq!(parsed.triangles()[0][0][0], 0.1f32 as f64);
        assert_eq!(parsed.triangles()[0][0][1], (1e3f64 + 0.3) as f32 as f64);
    }
}
