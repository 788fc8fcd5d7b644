"""Export the fixed-seed fixtures used by the ingest tests.

Usage: python3 scripts/export_fixture.py crates/core/tests/fixtures

Writes fc2_3x3.onnx (Gemm, Relu, Gemm), conv_4x4.onnx (Conv, Relu, MaxPool,
Flatten, Gemm) and reference.json holding float32 forward passes on a few
fixed inputs.
"""
import json
import os
import sys

import torch


def export(model, dummy, path):
    model.eval()
    torch.onnx.export(
        model,
        dummy,
        path,
        input_names=["actual_input"],
        output_names=["actual_output"],
        opset_version=13,
        dynamo=False,
    )


def main(out_dir):
    torch.manual_seed(0)
    fc = torch.nn.Sequential(
        torch.nn.Linear(9, 4),
        torch.nn.ReLU(),
        torch.nn.Linear(4, 2),
    )
    conv = torch.nn.Sequential(
        torch.nn.Conv2d(1, 2, kernel_size=3, padding=1),
        torch.nn.ReLU(),
        torch.nn.MaxPool2d(2),
        torch.nn.Flatten(),
        torch.nn.Linear(8, 2),
    )
    export(fc, torch.zeros(1, 9), os.path.join(out_dir, "fc2_3x3.onnx"))
    export(conv, torch.zeros(1, 1, 4, 4), os.path.join(out_dir, "conv_4x4.onnx"))

    gen = torch.Generator().manual_seed(1)
    reference = {"fc2_3x3": [], "conv_4x4": []}
    with torch.no_grad():
        for _ in range(8):
            x = torch.rand(1, 9, generator=gen)
            reference["fc2_3x3"].append(
                {"input": x.flatten().tolist(), "output": fc(x).flatten().tolist()}
            )
            x = torch.rand(1, 1, 4, 4, generator=gen)
            reference["conv_4x4"].append(
                {"input": x.flatten().tolist(), "output": conv(x).flatten().tolist()}
            )
    with open(os.path.join(out_dir, "reference.json"), "w") as f:
        json.dump(reference, f, indent=1)


if __name__ == "__main__":
    main(sys.argv[1])
