//! Regenerates the JSON fixture files under `fixtures/`. Run with
//! `cargo run -p qfound --example gen_fixtures`. Output is deterministic, so
//! the committed files only change when the schema or the builders do.

use std::collections::BTreeMap;
use std::path::Path;

use qfound::schema::{
    channel_to_json, circuit_to_json, ChannelJson, CodebookJson, DimJson, InstrumentJson,
    ModelJson, OntModelJson, ResponseJson,
};
use qfound_core::channel::Channel;
use qfound_core::comm::random_code;
use qfound_core::ctc::{grandfather_circuit, unproved_theorem_circuit};
use qfound_core::dense::DenseOperator;
use qfound_core::dims::{dual_label, Dim, Dims};
use qfound_core::mat::Mat;
use qfound_core::qci::{coherent_copy_channel, incoherent_copy_channel};
use qfound_core::{Complex64, Tol};

fn write_pretty<T: serde::Serialize>(dir: &Path, name: &str, value: &T) {
    let path = dir.join(name);
    let mut bytes = serde_json::to_vec_pretty(value).expect("fixture serializes");
    bytes.push(b'\n');
    std::fs::write(&path, bytes).expect("fixture writes");
    println!("wrote {}", path.display());
}

/// Root channel holding a classical (diagonal) state.
fn diag_root(label: &str, weights: &[f64]) -> Channel {
    let d = weights.len();
    let mut m = Mat::zeros(d, d);
    for (i, w) in weights.iter().enumerate() {
        m[(i, i)] = Complex64::new(*w, 0.0);
    }
    let cj = DenseOperator::from_mat(Dims::single(label, d), m).expect("diagonal state");
    Channel::new(Dims::scalar(), Dims::single(label, d), cj, &Tol::default())
        .expect("classical root is a channel")
}

/// Basis-diagonal channel from the parent's output slot, p[x][y] = P(x|y).
fn classical_edge(parent: &str, node: &str, p: &[Vec<f64>]) -> Channel {
    let dx = p.len();
    let dy = p[0].len();
    let slot = dual_label(parent);
    let dims = Dims::new(vec![Dim::new(node, dx), Dim::new(dual_label(&slot), dy)])
        .expect("distinct labels");
    let mut m = Mat::zeros(dx * dy, dx * dy);
    for x in 0..dx {
        for y in 0..dy {
            m[(x * dy + y, x * dy + y)] = Complex64::new(p[x][y], 0.0);
        }
    }
    let cj = DenseOperator::from_mat(dims, m).expect("diagonal CJ");
    Channel::new(Dims::single(&slot, dy), Dims::single(node, dx), cj, &Tol::default())
        .expect("stochastic table is a channel")
}

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    std::fs::create_dir_all(&dir).expect("fixtures dir");

    let unproved = unproved_theorem_circuit(1).expect("one-bit registers");
    write_pretty(&dir, "unproved_theorem.json", &circuit_to_json(&unproved));
    write_pretty(&dir, "grandfather.json", &circuit_to_json(&grandfather_circuit()));

    let incoherent = incoherent_copy_channel(2, &["B", "C"], "A").expect("copy channel");
    write_pretty(&dir, "incoherent_copy.json", &channel_to_json(&incoherent));
    let coherent = coherent_copy_channel(2, &["B", "C"], "A").expect("copy channel");
    write_pretty(&dir, "coherent_copy.json", &channel_to_json(&coherent));

    let chain_channels: BTreeMap<String, ChannelJson> = [
        ("A".to_string(), channel_to_json(&diag_root("A", &[0.6, 0.4]))),
        (
            "B".to_string(),
            channel_to_json(&classical_edge(
                "A",
                "B",
                &[vec![0.8, 0.3], vec![0.2, 0.7]],
            )),
        ),
        (
            "C".to_string(),
            channel_to_json(&classical_edge(
                "B",
                "C",
                &[vec![0.9, 0.1], vec![0.1, 0.9]],
            )),
        ),
    ]
    .into_iter()
    .collect();
    let nodes = vec![
        DimJson { label: "A".to_string(), d: 2 },
        DimJson { label: "B".to_string(), d: 2 },
        DimJson { label: "C".to_string(), d: 2 },
    ];
    let edges = vec![
        ["A".to_string(), "B".to_string()],
        ["B".to_string(), "C".to_string()],
    ];
    let instruments: BTreeMap<String, InstrumentJson> = ["A", "B", "C"]
        .iter()
        .map(|n| (n.to_string(), InstrumentJson::Named("projective".to_string())))
        .collect();
    write_pretty(
        &dir,
        "chain_model.json",
        &ModelJson {
            nodes: nodes.clone(),
            edges: edges.clone(),
            channels: chain_channels.clone(),
            instruments,
        },
    );
    write_pretty(
        &dir,
        "chain_model_bare.json",
        &ModelJson {
            nodes,
            edges,
            channels: chain_channels,
            instruments: BTreeMap::new(),
        },
    );

    let ont = OntModelJson {
        states: (0..4).map(|i| format!("l{i}")).collect(),
        preparations: [
            ("p0".to_string(), vec![0.5, 0.5, 0.0, 0.0]),
            ("p1".to_string(), vec![0.0, 0.5, 0.25, 0.25]),
        ]
        .into_iter()
        .collect(),
        transforms: BTreeMap::new(),
        responses: [(
            "flip".to_string(),
            ResponseJson {
                outcomes: vec!["0".to_string(), "1".to_string()],
                probs: vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0],
            },
        )]
        .into_iter()
        .collect(),
    };
    write_pretty(&dir, "ont_model.json", &ont);

    let code = random_code(3, 16, 0.25, 0.75, 51).expect("window code at n=3, m=16");
    write_pretty(
        &dir,
        "code_n3.json",
        &CodebookJson {
            n: code.n(),
            m: code.m(),
            words: code.words().to_vec(),
        },
    );
    write_pretty(
        &dir,
        "code_n1.json",
        &CodebookJson {
            n: 1,
            m: 4,
            words: vec!["0000".to_string(), "0011".to_string()],
        },
    );
}
