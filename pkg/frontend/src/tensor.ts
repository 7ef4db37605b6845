import * as fs from 'fs'

/**
 * Binary tensor file format shared with the gaussot toolkit:
 *
 *   magic   "GOTF" (4 bytes)
 *   version u32 LE (currently 1)
 *   dtype   u8     (1 = float32)
 *   ndim    u8
 *   dims    ndim x u32 LE
 *   payload row-major float32 LE
 *
 * Feature tensors are channel-major (C, H, W).
 */

const MAGIC = 'GOTF'
const VERSION = 1
const DTYPE_F32 = 1

export interface TensorFile {
  dims: number[]
  data: Float32Array
}

export function writeTensor(path: string, dims: number[], data: Float32Array): void {
  const count = dims.reduce((a, b) => a * b, 1)
  if (count !== data.length) {
    throw new Error(`dims ${dims.join('x')} do not match ${data.length} values`)
  }
  for (const v of data) {
    if (!Number.isFinite(v)) {
      throw new Error('refusing to write non-finite tensor values')
    }
  }
  const header = Buffer.alloc(4 + 4 + 1 + 1 + 4 * dims.length)
  header.write(MAGIC, 0, 'ascii')
  header.writeUInt32LE(VERSION, 4)
  header.writeUInt8(DTYPE_F32, 8)
  header.writeUInt8(dims.length, 9)
  dims.forEach((d, i) => header.writeUInt32LE(d, 10 + 4 * i))
  const payload = Buffer.alloc(4 * count)
  for (let i = 0; i < count; i++) {
    payload.writeFloatLE(data[i], 4 * i)
  }
  fs.writeFileSync(path, Buffer.concat([header, payload]))
}

export function readTensor(path: string): TensorFile {
  const buf = fs.readFileSync(path)
  if (buf.length < 10 || buf.toString('ascii', 0, 4) !== MAGIC) {
    throw new Error(`${path}: not a tensor file`)
  }
  const version = buf.readUInt32LE(4)
  if (version !== VERSION) {
    throw new Error(`${path}: unsupported tensor version ${version}`)
  }
  const dtype = buf.readUInt8(8)
  if (dtype !== DTYPE_F32) {
    throw new Error(`${path}: unsupported dtype ${dtype}`)
  }
  const ndim = buf.readUInt8(9)
  const headerLen = 10 + 4 * ndim
  if (buf.length < headerLen) {
    throw new Error(`${path}: truncated header`)
  }
  const dims: number[] = []
  for (let i = 0; i < ndim; i++) {
    dims.push(buf.readUInt32LE(10 + 4 * i))
  }
  const count = dims.reduce((a, b) => a * b, 1)
  if (buf.length !== headerLen + 4 * count) {
    throw new Error(`${path}: truncated payload`)
  }
  const data = new Float32Array(count)
  for (let i = 0; i < count; i++) {
    data[i] = buf.readFloatLE(headerLen + 4 * i)
    if (!Number.isFinite(data[i])) {
      throw new Error(`${path}: non-finite value at index ${i}`)
    }
  }
  return { dims, data }
}
