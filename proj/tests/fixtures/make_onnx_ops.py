#!/usr/bin/env python3
"""Single-operator models with onnxruntime reference outputs (onnx_ops/)."""

import json
from pathlib import Path

import numpy as np
import onnx
import onnxruntime as ort
from onnx import TensorProto, helper, numpy_helper

OUT = Path(__file__).parent / "onnx_ops"
OPSET = 17
rng = np.random.default_rng(7)

F = TensorProto.FLOAT
I = TensorProto.INT64
B = TensorProto.BOOL
NP = {F: np.float32, I: np.int64, B: np.bool_}


def f(*shape):
    return rng.standard_normal(shape).astype(np.float32)


def make(name, op, inputs, out_type=F, attrs=None, consts=None, n_out=1):
    """inputs: list of (name, array); consts become initializers."""
    consts = consts or {}
    feeds = {k: v for k, v in inputs}
    graph_inputs = [helper.make_tensor_value_info(k, helper.np_dtype_to_tensor_dtype(v.dtype), list(v.shape))
                    for k, v in inputs]
    inits = [numpy_helper.from_array(v, k) for k, v in consts.items()]
    in_names = [k for k, _ in inputs] + list(consts)
    outs = [f"y{i}" for i in range(n_out)]
    node = helper.make_node(op, in_names, outs, name=name, **(attrs or {}))
    graph = helper.make_graph([node], name, graph_inputs,
                              [helper.make_tensor_value_info(o, out_type, None) for o in outs], inits)
    model = helper.make_model(graph, opset_imports=[helper.make_opsetid("", OPSET)])
    model.ir_version = 8

    data = model.SerializeToString()
    (OUT / f"{name}.onnx").write_bytes(data)
    sess = ort.InferenceSession(data, providers=["CPUExecutionProvider"])
    res = sess.run(None, feeds)
    return {"name": name, "op": op,
            "inputs": {k: {"shape": list(v.shape), "dtype": str(v.dtype), "data": v.ravel().tolist()} for k, v in inputs},
            "outputs": [{"shape": list(r.shape), "dtype": str(r.dtype), "data": r.ravel().astype(np.float64 if r.dtype != np.bool_ else np.int64).tolist()} for r in res]}


def i64(*vals):
    return np.array(vals, dtype=np.int64)


def main():
    OUT.mkdir(exist_ok=True)
    c = []
    for op in ["Add", "Sub", "Mul", "Div"]:
        c.append(make(f"{op.lower()}_broadcast", op, [("a", f(2, 3, 4)), ("b", f(3, 1))]))
    c.append(make("pow", "Pow", [("a", np.abs(f(3, 4)) + 0.1), ("b", f(4))]))
    for op in ["Equal", "Less", "Greater", "LessOrEqual", "GreaterOrEqual"]:
        a = rng.integers(0, 3, (3, 4)).astype(np.float32)
        c.append(make(op.lower(), op, [("a", a), ("b", rng.integers(0, 3, (4,)).astype(np.float32))], B))
    ba, bb = rng.integers(0, 2, (2, 3)).astype(bool), rng.integers(0, 2, (2, 3)).astype(bool)
    c.append(make("and", "And", [("a", ba), ("b", bb)], B))
    c.append(make("or", "Or", [("a", ba), ("b", bb)], B))
    c.append(make("not", "Not", [("a", ba)], B))
    for op in ["Erf", "Tanh", "Exp", "Sigmoid", "Relu", "Neg", "Abs", "Floor", "Ceil", "Identity"]:
        c.append(make(op.lower(), op, [("x", f(2, 5))]))
    for op in ["Sqrt", "Log", "Reciprocal"]:
        c.append(make(op.lower(), op, [("x", np.abs(f(2, 5)) + 0.5)]))
    c.append(make("cast_int", "Cast", [("x", f(2, 3) * 3)], I, {"to": I}))
    c.append(make("cast_float", "Cast", [("x", i64(1, -2, 3).reshape(3))], F, {"to": F}))
    c.append(make("clip", "Clip", [("x", f(3, 4))], F, consts={"lo": np.array(-0.5, np.float32), "hi": np.array(0.5, np.float32)}))
    c.append(make("where", "Where", [("c", ba), ("a", f(2, 3)), ("b", f(1, 3))]))
    c.append(make("gather", "Gather", [("x", f(5, 3)), ("i", i64(0, 4, -1, 2).reshape(2, 2))], attrs={"axis": 0}))
    c.append(make("gather_axis1", "Gather", [("x", f(2, 5, 3)), ("i", i64(1, 3))], attrs={"axis": 1}))
    c.append(make("gemm", "Gemm", [("a", f(3, 4)), ("b", f(5, 4)), ("c", f(5))],
                  attrs={"transB": 1, "alpha": 0.7, "beta": 1.3}))
    c.append(make("matmul_batched", "MatMul", [("a", f(2, 3, 4)), ("b", f(4, 5))]))
    c.append(make("matmul_4d", "MatMul", [("a", f(2, 2, 3, 4)), ("b", f(2, 2, 4, 3))]))
    c.append(make("layernorm", "LayerNormalization", [("x", f(2, 3, 6)), ("g", f(6)), ("b", f(6))],
                  attrs={"axis": -1, "epsilon": 1e-5}))
    c.append(make("softmax", "Softmax", [("x", f(2, 3, 4))], attrs={"axis": -1}))
    c.append(make("softmax_axis1", "Softmax", [("x", f(2, 3, 4))], attrs={"axis": 1}))
    for op in ["ReduceMean", "ReduceMax", "ReduceMin", "ReduceProd"]:
        c.append(make(op.lower(), op, [("x", f(2, 3, 4))], attrs={"axes": [1], "keepdims": 1}))
    c.append(make("reducesum", "ReduceSum", [("x", f(2, 3, 4)), ("axes", i64(-1))], attrs={"keepdims": 0}))
    c.append(make("reducesum_all", "ReduceSum", [("x", f(2, 3, 4))]))
    c.append(make("unsqueeze", "Unsqueeze", [("x", f(2, 3)), ("axes", i64(0, 3))]))
    c.append(make("squeeze", "Squeeze", [("x", f(1, 3, 1, 2)), ("axes", i64(0, 2))]))
    c.append(make("shape", "Shape", [("x", f(2, 3, 4))], I))
    c.append(make("size", "Size", [("x", f(2, 3, 4))], I))
    c.append(make("concat", "Concat", [("a", f(2, 3)), ("b", f(2, 1))], attrs={"axis": 1}))
    c.append(make("reshape", "Reshape", [("x", f(2, 3, 4)), ("s", i64(0, -1, 2))]))
    c.append(make("flatten", "Flatten", [("x", f(2, 3, 4))], attrs={"axis": 2}))
    c.append(make("expand", "Expand", [("x", f(3, 1)), ("s", i64(2, 1, 4))]))
    c.append(make("transpose", "Transpose", [("x", f(2, 3, 4))], attrs={"perm": [2, 0, 1]}))
    c.append(make("slice", "Slice", [("x", f(4, 6)), ("s", i64(1, -1)), ("e", i64(100, -5)), ("a", i64(0, 1)), ("t", i64(2, -2))]))
    c.append(make("constantofshape", "ConstantOfShape", [("s", i64(2, 3))], F,
                  {"value": helper.make_tensor("v", F, [1], [1.5])}))
    c.append(make("range", "Range", [("s", np.array(1, np.int64)), ("l", np.array(10, np.int64)), ("d", np.array(3, np.int64))], I))
    c.append(make("cumsum", "CumSum", [("x", f(2, 4)), ("a", np.array(1, np.int64))]))
    c.append(make("dropout", "Dropout", [("x", f(2, 3))]))
    (OUT / "cases.json").write_text(json.dumps(c) + "\n")

    # A model using an operator outside the supported set.
    node = helper.make_node("TopK", ["x", "k"], ["v", "i"], name="topk")
    graph = helper.make_graph([node], "unsupported",
                              [helper.make_tensor_value_info("x", F, [4])],
                              [helper.make_tensor_value_info("v", F, None)],
                              [numpy_helper.from_array(i64(2), "k")])
    model = helper.make_model(graph, opset_imports=[helper.make_opsetid("", OPSET)])
    model.ir_version = 8
    (OUT / "unsupported_op.onnx").write_bytes(model.SerializeToString())
    print(len(c), "cases")


if __name__ == "__main__":
    main()
