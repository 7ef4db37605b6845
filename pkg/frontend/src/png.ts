import * as fs from 'fs'
import { PNG } from 'pngjs'

/** RGB image as planar float arrays in [0, 1], matching the toolkit's
 * channel conventions: data[c][y * width + x]. */
export interface RgbImage {
  width: number
  height: number
  /** 3 planes of length width * height */
  planes: Float64Array[]
}

export function newImage(width: number, height: number): RgbImage {
  return {
    width,
    height,
    planes: [0, 1, 2].map(() => new Float64Array(width * height)),
  }
}

export function readPng(path: string): RgbImage {
  const png = PNG.sync.read(fs.readFileSync(path))
  const image = newImage(png.width, png.height)
  for (let i = 0; i < png.width * png.height; i++) {
    for (let c = 0; c < 3; c++) {
      image.planes[c][i] = png.data[4 * i + c] / 255
    }
  }
  return image
}

export function writePng(path: string, image: RgbImage): void {
  const png = new PNG({ width: image.width, height: image.height })
  for (let i = 0; i < image.width * image.height; i++) {
    for (let c = 0; c < 3; c++) {
      const v = Math.min(1, Math.max(0, image.planes[c][i]))
      png.data[4 * i + c] = Math.round(v * 255)
    }
    png.data[4 * i + 3] = 255
  }
  fs.writeFileSync(path, PNG.sync.write(png))
}

/** Mean squared error between two images of equal size. */
export function mse(a: RgbImage, b: RgbImage): number {
  if (a.width !== b.width || a.height !== b.height) {
    throw new Error('image sizes differ')
  }
  let acc = 0
  const n = a.width * a.height
  for (let c = 0; c < 3; c++) {
    for (let i = 0; i < n; i++) {
      const d = a.planes[c][i] - b.planes[c][i]
      acc += d * d
    }
  }
  return acc / (3 * n)
}
