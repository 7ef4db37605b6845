import { BridgeWeights, CHANNELS, LEVELS } from './weights'
import { RgbImage, newImage } from './png'

/**
 * Invertible multi-scale feature codec.
 *
 * Level r (1 = finest, 5 = coarsest) maps an RGB image through:
 *   1. average pooling with factor 2^(r-1),
 *   2. space-to-depth with block 2 (3 -> 12 channels),
 *   3. an orthogonal 1x1 channel mixing matrix (per level, from the
 *      weights file).
 * Decoding applies the exact inverses; the only loss is the pooling at
 * r > 1 (undone by nearest-neighbor upsampling) and pixel quantization.
 */

export interface FeatureTensor {
  /** (C, H, W) */
  dims: [number, number, number]
  data: Float32Array
}

export function poolFactor(level: number): number {
  if (!Number.isInteger(level) || level < 1 || level > LEVELS) {
    throw new Error(`level must be in 1..${LEVELS}, got ${level}`)
  }
  return 2 ** (level - 1)
}

/** Total downscale between image and feature grid (pool x space-to-depth). */
export function strideFor(level: number): number {
  return 2 * poolFactor(level)
}

function avgPool(image: RgbImage, factor: number): RgbImage {
  if (factor === 1) return image
  const w = image.width / factor
  const h = image.height / factor
  const out = newImage(w, h)
  for (let c = 0; c < 3; c++) {
    for (let y = 0; y < h; y++) {
      for (let x = 0; x < w; x++) {
        let acc = 0
        for (let dy = 0; dy < factor; dy++) {
          for (let dx = 0; dx < factor; dx++) {
            acc += image.planes[c][(y * factor + dy) * image.width + (x * factor + dx)]
          }
        }
        out.planes[c][y * w + x] = acc / (factor * factor)
      }
    }
  }
  return out
}

function upsampleNearest(image: RgbImage, factor: number): RgbImage {
  if (factor === 1) return image
  const out = newImage(image.width * factor, image.height * factor)
  for (let c = 0; c < 3; c++) {
    for (let y = 0; y < out.height; y++) {
      for (let x = 0; x < out.width; x++) {
        out.planes[c][y * out.width + x] =
          image.planes[c][Math.floor(y / factor) * image.width + Math.floor(x / factor)]
      }
    }
  }
  return out
}

export function extractFeatures(
  image: RgbImage,
  level: number,
  weights: BridgeWeights,
): FeatureTensor {
  const stride = strideFor(level)
  if (image.width % stride !== 0 || image.height % stride !== 0) {
    throw new Error(
      `level ${level} needs dimensions divisible by ${stride}, got ${image.width}x${image.height}`,
    )
  }
  const pooled = avgPool(image, poolFactor(level))
  const w = pooled.width / 2
  const h = pooled.height / 2
  const mix = weights.matrices[level - 1]
  const data = new Float32Array(CHANNELS * h * w)
  const raw = new Float64Array(CHANNELS)
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < w; x++) {
      // space-to-depth: channel = rgb * 4 + (dy * 2 + dx)
      for (let c = 0; c < 3; c++) {
        for (let dy = 0; dy < 2; dy++) {
          for (let dx = 0; dx < 2; dx++) {
            raw[c * 4 + dy * 2 + dx] =
              pooled.planes[c][(2 * y + dy) * pooled.width + (2 * x + dx)]
          }
        }
      }
      for (let i = 0; i < CHANNELS; i++) {
        let acc = 0
        for (let j = 0; j < CHANNELS; j++) acc += mix[i][j] * raw[j]
        data[i * h * w + y * w + x] = acc
      }
    }
  }
  return { dims: [CHANNELS, h, w], data }
}

export function decodeFeatures(
  tensor: FeatureTensor,
  level: number,
  weights: BridgeWeights,
): RgbImage {
  const [c, h, w] = tensor.dims
  if (c !== CHANNELS) {
    throw new Error(`expected ${CHANNELS} channels at level ${level}, got ${c}`)
  }
  const mix = weights.matrices[level - 1]
  const small = newImage(2 * w, 2 * h)
  const mixed = new Float64Array(CHANNELS)
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < w; x++) {
      for (let i = 0; i < CHANNELS; i++) {
        mixed[i] = tensor.data[i * h * w + y * w + x]
      }
      for (let j = 0; j < CHANNELS; j++) {
        // orthogonal mixing: the inverse is the transpose
        let acc = 0
        for (let i = 0; i < CHANNELS; i++) acc += mix[i][j] * mixed[i]
        const rgb = Math.floor(j / 4)
        const dy = Math.floor((j % 4) / 2)
        const dx = j % 2
        small.planes[rgb][(2 * y + dy) * small.width + (2 * x + dx)] = acc
      }
    }
  }
  return upsampleNearest(small, poolFactor(level))
}
