/** Image payload codec: base64 of little-endian float32, row-major. */

export interface WireImage {
  h: number;
  w: number;
  c: number;
  data: string;
}

export function decodeImage(img: WireImage): Float32Array {
  if (!Number.isInteger(img.h) || !Number.isInteger(img.w) || !Number.isInteger(img.c)) {
    throw new Error("image dimensions must be integers");
  }
  const buf = Buffer.from(img.data, "base64");
  if (buf.byteLength !== img.h * img.w * img.c * 4) {
    throw new Error(
      `payload is ${buf.byteLength} bytes, expected ${img.h * img.w * img.c * 4}`,
    );
  }
  // copy so the view owns aligned memory regardless of Buffer pooling
  const bytes = new Uint8Array(buf);
  return new Float32Array(bytes.buffer, bytes.byteOffset, img.h * img.w * img.c);
}

export function encodeImage(h: number, w: number, c: number, pixels: Float32Array): WireImage {
  const data = Buffer.from(pixels.buffer, pixels.byteOffset, pixels.byteLength)
    .toString("base64");
  return { h, w, c, data };
}
