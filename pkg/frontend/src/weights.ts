import * as fs from 'fs'
import * as path from 'path'

export const LEVELS = 5
export const CHANNELS = 12

const WEIGHTS_FILE = 'bridge-weights.json'

export interface BridgeWeights {
  version: number
  levels: number
  channels: number
  seed: number
  /** One orthogonal channels x channels mixing matrix per level, row-major. */
  matrices: number[][][]
}

/** Deterministic 32-bit PRNG so weight generation is reproducible. */
function mulberry32(seed: number): () => number {
  let state = seed >>> 0
  return () => {
    state = (state + 0x6d2b79f5) >>> 0
    let t = state
    t = Math.imul(t ^ (t >>> 15), t | 1)
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61)
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296
  }
}

/** Orthonormalize random rows with modified Gram-Schmidt. */
function randomOrthogonal(n: number, rand: () => number): number[][] {
  const rows: number[][] = []
  while (rows.length < n) {
    const v = Array.from({ length: n }, () => rand() * 2 - 1)
    for (const u of rows) {
      const dot = v.reduce((acc, x, i) => acc + x * u[i], 0)
      for (let i = 0; i < n; i++) v[i] -= dot * u[i]
    }
    const norm = Math.sqrt(v.reduce((acc, x) => acc + x * x, 0))
    if (norm < 1e-6) continue // nearly dependent draw; resample
    rows.push(v.map(x => x / norm))
  }
  return rows
}

export function initWeights(weightsDir: string, seed: number): BridgeWeights {
  const rand = mulberry32(seed)
  const weights: BridgeWeights = {
    version: 1,
    levels: LEVELS,
    channels: CHANNELS,
    seed,
    matrices: Array.from({ length: LEVELS }, () => randomOrthogonal(CHANNELS, rand)),
  }
  fs.mkdirSync(weightsDir, { recursive: true })
  fs.writeFileSync(path.join(weightsDir, WEIGHTS_FILE), JSON.stringify(weights))
  return weights
}

export function loadWeights(weightsDir: string): BridgeWeights {
  const file = path.join(weightsDir, WEIGHTS_FILE)
  if (!fs.existsSync(file)) {
    throw new Error(`missing weights at ${file}; run init-weights first`)
  }
  const weights = JSON.parse(fs.readFileSync(file, 'utf8')) as BridgeWeights
  if (weights.version !== 1 || weights.levels !== LEVELS || weights.channels !== CHANNELS) {
    throw new Error(`unsupported weights layout in ${file}`)
  }
  for (const m of weights.matrices) {
    assertOrthogonal(m)
  }
  return weights
}

function assertOrthogonal(m: number[][]): void {
  const n = m.length
  for (let i = 0; i < n; i++) {
    for (let j = i; j < n; j++) {
      const dot = m[i].reduce((acc, x, k) => acc + x * m[j][k], 0)
      const want = i === j ? 1 : 0
      if (Math.abs(dot - want) > 1e-8) {
        throw new Error('weights file contains a non-orthogonal mixing matrix')
      }
    }
  }
}
