// SPDX-License-Identifier: Apache-2.0

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::diffcore::{ParamSet, Tape, Tensor};
use crate::graphio::{AstNode, Category};

fn graph_of(src: &str) -> (VerilogModule, crate::graphio::AstGraph) {
    let m = parse(src).unwrap();
    let g = to_ast_graph(&m);
    g.validate(0).unwrap();
    (m, g)
}

fn counts(g: &crate::graphio::AstGraph) -> [usize; 5] {
    Category::ALL.map(|c| g.count(c))
}

#[test]
fn inverter_parses_and_lowers() {
    let src = "module m(input a, output b); assign b = ~a; endmodule";
    let (m, g) = graph_of(src);
    assert_eq!(m.ports.len(), 2);
    assert_eq!((m.ports[0].direction, m.ports[0].width()), (Direction::Input, 1));
    assert_eq!(m.ports[1].direction, Direction::Output);
    assert!(matches!(
        &m.items[0],
        Item::Assign(LValue::Ident(b, _), Expr::Unary(UnaryOp::Not, _), _) if b == "b"
    ));
    assert_eq!(counts(&g), [1, 2, 1, 0, 1]);
    let fv = extract_features_108(&g, &m);
    assert_eq!((fv.total_in_bits, fv.total_out_bits), (1, 1));
    assert_eq!(fv.op_type_freq[OpCode::Not.code() as usize], 1);
    assert_eq!(fv.op_type_freq.iter().sum::<u64>(), 1);
    // root -> assign -> not -> a
    assert_eq!(fv.longest_path, 3);
}

#[test]
fn vector_passthrough() {
    let (m, g) = graph_of("module m(input [3:0] a, output [3:0] b); assign b = a; endmodule");
    assert_eq!(m.ports[0].width(), 4);
    assert_eq!(m.ports[1].width(), 4);
    assert_eq!(g.count(Category::Operation), 0);
    let fv = extract_features_108(&g, &m);
    assert_eq!((fv.total_in_bits, fv.total_out_bits), (4, 4));
    assert!(fv.op_type_freq.iter().all(|&c| c == 0));
    assert_eq!(fv.op_type_freq[0], 0);
}

#[test]
fn constant_driver_has_one_constant() {
    let (_, g) = graph_of("module m(output b); assign b = 1'b0; endmodule");
    assert_eq!(g.count(Category::Constant), 1);
    assert_eq!(g.nodes.iter().find(|n| n.category == Category::Constant).unwrap().out_bits, 1);
}

#[test]
fn initial_block_is_named_unsupported() {
    let err = parse("module m(output reg q); initial q = 0; endmodule").unwrap_err();
    assert_eq!(err.kind, ErrorKind::Unsupported("initial".into()));
    assert_eq!(err.category(), "unsupported");
}

#[test]
fn syntax_errors_list_expected_tokens() {
    let err = parse("module m(input a, output b) assign b = a; endmodule").unwrap_err();
    match err.kind {
        ErrorKind::Syntax { expected, .. } => assert_eq!(expected, vec![";".to_string()]),
        other => panic!("{other:?}"),
    }
    assert_eq!(err.span.line, 1);
}

#[test]
fn semantic_errors() {
    for src in [
        "module m(input a, output b); assign b = c; endmodule",
        "module m(input a, output b); assign a = b; endmodule",
        "module m(input a, output reg b); assign b = a; endmodule",
        "module m(input a, output b); always @(*) b = a; endmodule",
        "module m(input a, input a); endmodule",
        "module m(input [3:0] a, output b); assign b = a[4]; endmodule",
        "module m(input a, output b); sub u(.x(a)); endmodule",
    ] {
        let err = parse(src).unwrap_err();
        assert_eq!(err.category(), "semantic", "{src}: {err}");
    }
}

#[test]
fn ternary_concat_and_sequential_logic() {
    let src = "
        module m(input clk, input rst, input [1:0] s, input [3:0] a, output reg [3:0] q);
          wire [3:0] n;
          assign n = s[0] ? {a[1:0], 2'b00} : a + 4'd1;
          always @(posedge clk or negedge rst) begin
            if (!rst) q <= 0;
            else case (s)
              2'd0: q <= n;
              default: q <= ~q;
            endcase
          end
        endmodule";
    let (m, g) = graph_of(src);
    let fv = extract_features_108(&g, &m);
    assert_eq!(fv.total_in_bits, 1 + 1 + 2 + 4);
    assert_eq!(fv.total_out_bits, 4);
    let op = |o: OpCode| fv.op_type_freq[o.code() as usize];
    assert_eq!(op(OpCode::Ternary), 1);
    assert_eq!(op(OpCode::Concat), 1);
    assert_eq!(op(OpCode::Add), 1);
    assert_eq!(op(OpCode::BitSelect), 1);
    assert_eq!(op(OpCode::PartSelect), 1);
    assert_eq!(op(OpCode::Posedge), 1);
    assert_eq!(op(OpCode::Negedge), 1);
    assert_eq!(op(OpCode::If), 1);
    assert_eq!(op(OpCode::Case), 1);
    assert_eq!(op(OpCode::CaseItem), 1);
    assert_eq!(op(OpCode::DefaultItem), 1);
    assert_eq!(op(OpCode::LogicNot), 1);
    assert_eq!(op(OpCode::Not), 1);
    assert_eq!(fv.node_type_freq.iter().sum::<u64>() as usize, g.nodes.len());
    // assign + always + 3 procedural assignments
    assert_eq!(g.count(Category::Edge), 5);
}

#[test]
fn instance_is_inlined_one_level() {
    let src = "
        module inv(input x, output y); assign y = ~x; endmodule
        module top(input a, output b); wire t; inv u0(.x(a), .y(t)); inv u1(t, b); endmodule";
    let (m, g) = graph_of(src);
    assert_eq!(m.name, "top");
    assert_eq!(m.submodules.len(), 1);
    let fv = extract_features_108(&g, &m);
    assert_eq!(fv.op_type_freq[OpCode::Instance.code() as usize], 2);
    assert_eq!(fv.op_type_freq[OpCode::Not.code() as usize], 2);
    // root, a, b, t, and x/y inside each instance
    assert_eq!(g.count(Category::Variable), 3 + 4);
    // inner assign + two connections, per instance
    assert_eq!(g.count(Category::Edge), 6);

    let err = parse(
        "module a(input x, output y); assign y = x; endmodule
         module b(input x, output y); a u(x, y); endmodule
         module c(input x, output y); b u(x, y); endmodule",
    )
    .unwrap_err();
    assert_eq!(err.kind, ErrorKind::Unsupported("nested module hierarchy".into()));

    let named = parse_with_top(src, Some("inv")).unwrap();
    assert_eq!(named.name, "inv");
}

#[test]
fn root_with_one_child_has_path_one() {
    let (_, g) = graph_of("module m(input a); endmodule");
    assert_eq!(longest_path(&g), 1);
}

#[test]
fn parsing_is_deterministic() {
    let src = "module m(input [7:0] a, b, output [7:0] y); assign y = (a & b) ^ (a | b); endmodule";
    assert_eq!(parse(src).unwrap(), parse(src).unwrap());
    let m = parse(src).unwrap();
    assert_eq!(m.ports[1].width(), 8, "b shares the [7:0] range");
    assert_eq!(to_ast_graph(&m), to_ast_graph(&m));
}

#[test]
fn widths_follow_operator_rules() {
    let m = parse(
        "module m(input [7:0] a, input [3:0] b, output [11:0] y, output z);
           assign y = {a, b}; assign z = a < b; endmodule",
    )
    .unwrap();
    let g = to_ast_graph(&m);
    let concat = g
        .nodes
        .iter()
        .find(|n| n.op_type == OpCode::Concat.code())
        .unwrap();
    assert_eq!((concat.in_bits, concat.out_bits), (12, 12));
    let lt = g.nodes.iter().find(|n| n.op_type == OpCode::Lt.code()).unwrap();
    assert_eq!((lt.in_bits, lt.out_bits), (12, 1));
}

#[test]
fn encoder_caps_bits_at_200() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut proj = ParamSet::new();
    init_node_encoder(&mut proj, &mut rng);
    let n = AstNode::new(Category::Variable, 0, 500, 3);
    let f = node_feature_encoder(&n, &proj).unwrap();
    assert_eq!(&f[0..4], proj.get("encoder.in_bits").unwrap().row(200));
    assert_eq!(&f[4..8], proj.get("encoder.out_bits").unwrap().row(3));
    assert_eq!(&f[8..12], proj.get("encoder.category").unwrap().row(1));
    assert_eq!(&f[12..16], proj.get("encoder.op").unwrap().row(0));
}

#[test]
fn zero_projection_gives_zero_vector() {
    let mut proj = ParamSet::new();
    for (name, classes) in ENCODER_TABLES {
        proj.insert(name, Tensor::zeros(&[classes, PROJ_DIM]));
    }
    let n = AstNode::new(Category::Operation, 7, 9, 1);
    assert_eq!(node_feature_encoder(&n, &proj).unwrap(), [0.0; 16]);
}

/// One-hot vectors times the projection matrices, computed densely.
fn one_hot_oracle(n: &AstNode, proj: &ParamSet) -> Vec<f64> {
    let mut out = Vec::new();
    for ((name, classes), class) in ENCODER_TABLES.iter().zip(node_classes(n)) {
        let table = proj.get(name).unwrap();
        let mut onehot = vec![0.0; *classes];
        onehot[class] = 1.0;
        for j in 0..PROJ_DIM {
            out.push((0..*classes).map(|c| onehot[c] * table.data()[c * PROJ_DIM + j]).sum());
        }
    }
    out
}

#[test]
fn encoder_matches_one_hot_product_and_tape_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut proj = ParamSet::new();
    init_node_encoder(&mut proj, &mut rng);
    let nodes = vec![
        AstNode::new(Category::Root, 0, 17, 4),
        AstNode::new(Category::Operation, 33, 250, 200),
        AstNode::new(Category::Edge, 0, 0, 0),
    ];
    let tape = Tape::new();
    let bound = proj.bind(&tape);
    let enc = encode_nodes(&tape, &bound, &nodes).unwrap();
    let value = tape.to_tensor(enc);
    assert_eq!(value.shape(), &[3, 16]);
    for (i, n) in nodes.iter().enumerate() {
        let direct = node_feature_encoder(n, &proj).unwrap();
        assert_eq!(value.row(i), &direct);
        assert_eq!(one_hot_oracle(n, &proj), direct.to_vec());
    }
}

#[test]
fn feature_csv_round_trip() {
    let (m, g) = graph_of("module m(input [2:0] a, output y); assign y = &a; endmodule");
    let fv = extract_features_108(&g, &m);
    let rows = vec![("m".to_string(), fv)];
    let mut buf = Vec::new();
    write_features_csv(&mut buf, &rows).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("design_id,f0,f1,"));
    assert!(text.lines().next().unwrap().ends_with(",f107"));
    assert_eq!(read_features_csv(buf.as_slice()).unwrap(), rows);
}
