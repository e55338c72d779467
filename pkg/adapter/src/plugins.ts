/** Model plugins behind the wire protocol.
 *
 * A plugin maps decoded pixel tensors to embedding vectors and class
 * probability rows. The bundled plugins are deterministic so integration
 * tests can recompute their outputs in closed form; real encoder wrappers
 * are user-supplied.
 */
import { WireImage, decodeImage } from "./codec.js";

export interface OraclePlugin {
  readonly name: string;
  readonly embedDim: number;
  readonly numClasses: number;
  embed(images: WireImage[]): number[][];
  probs(images: WireImage[]): number[][];
}

export interface Dims {
  h: number;
  w: number;
  c: number;
}

export function parseDims(spec: string): Dims {
  const parts = spec.split("x").map((v) => Number.parseInt(v, 10));
  if (parts.length !== 3 || parts.some((v) => !Number.isInteger(v) || v < 1)) {
    throw new Error(`bad --dims ${spec}; expected HxWxC`);
  }
  return { h: parts[0], w: parts[1], c: parts[2] };
}

function checkDims(img: WireImage, dims: Dims): void {
  if (img.h !== dims.h || img.w !== dims.w || img.c !== dims.c) {
    throw new Error(
      `image is ${img.h}x${img.w}x${img.c}, plugin expects ${dims.h}x${dims.w}x${dims.c}`,
    );
  }
}

/** Embeds an image as its flattened pixels; probabilities are uniform. */
export class IdentityPlugin implements OraclePlugin {
  readonly name = "identity";
  readonly embedDim: number;
  readonly numClasses: number;

  constructor(private dims: Dims, numClasses = 10) {
    if (numClasses < 2) throw new Error("numClasses must be at least 2");
    this.embedDim = dims.h * dims.w * dims.c;
    this.numClasses = numClasses;
  }

  embed(images: WireImage[]): number[][] {
    return images.map((img) => {
      checkDims(img, this.dims);
      return Array.from(decodeImage(img));
    });
  }

  probs(images: WireImage[]): number[][] {
    return images.map((img) => {
      checkDims(img, this.dims);
      return new Array(this.numClasses).fill(1 / this.numClasses);
    });
  }
}

/**
 * Deterministic toy classifier with a published closed form:
 *   - the image is averaged over channels and split into `numClasses`
 *     horizontal bands (the last band absorbs any remainder rows);
 *   - logit_k is the mean intensity of band k;
 *   - probabilities are softmax(logits / temperature) with temperature 0.1;
 *   - the embedding is the band-mean vector itself (embedDim = numClasses).
 */
export class ToyClassifierPlugin implements OraclePlugin {
  readonly name = "toy";
  readonly embedDim: number;
  readonly numClasses: number;
  readonly temperature = 0.1;

  constructor(private dims: Dims, numClasses = 4) {
    if (numClasses < 2 || numClasses > dims.h) {
      throw new Error("numClasses must lie in [2, image height]");
    }
    this.embedDim = numClasses;
    this.numClasses = numClasses;
  }

  bandMeans(img: WireImage): number[] {
    checkDims(img, this.dims);
    const pixels = decodeImage(img);
    const { h, w, c } = this.dims;
    const bandRows = Math.floor(h / this.numClasses);
    const means = new Array<number>(this.numClasses).fill(0);
    for (let k = 0; k < this.numClasses; k++) {
      const r0 = k * bandRows;
      const r1 = k === this.numClasses - 1 ? h : (k + 1) * bandRows;
      let sum = 0;
      for (let r = r0; r < r1; r++) {
        for (let i = r * w * c; i < (r + 1) * w * c; i++) sum += pixels[i];
      }
      means[k] = sum / ((r1 - r0) * w * c);
    }
    return means;
  }

  embed(images: WireImage[]): number[][] {
    return images.map((img) => this.bandMeans(img));
  }

  probs(images: WireImage[]): number[][] {
    return images.map((img) => {
      const logits = this.bandMeans(img).map((m) => m / this.temperature);
      const top = Math.max(...logits);
      const exps = logits.map((v) => Math.exp(v - top));
      const total = exps.reduce((a, b) => a + b, 0);
      return exps.map((v) => v / total);
    });
  }
}

export function buildPlugin(name: string, dims: Dims, numClasses: number): OraclePlugin {
  switch (name) {
    case "identity":
      return new IdentityPlugin(dims, numClasses);
    case "toy":
      return new ToyClassifierPlugin(dims, numClasses);
    default:
      throw new Error(`unknown plugin ${name}`);
  }
}
