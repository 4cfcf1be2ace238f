/** Binary PGM (P5, maxval 255) encode/decode. */

export function encodePgm(gray: Uint8Array, width: number, height: number): Buffer {
  if (gray.length !== width * height) {
    throw new Error(`pixel count ${gray.length} does not match ${width}x${height}`);
  }
  const header = Buffer.from(`P5\n${width} ${height}\n255\n`, "ascii");
  return Buffer.concat([header, Buffer.from(gray)]);
}

export function decodePgm(buf: Buffer): { width: number; height: number; gray: Uint8Array } {
  let pos = 0;
  const token = (): string => {
    while (pos < buf.length) {
      const c = buf[pos];
      if (c === 0x23) { // '#' comment
        while (pos < buf.length && buf[pos] !== 0x0a) pos++;
      } else if (c === 0x20 || c === 0x09 || c === 0x0d || c === 0x0a) {
        pos++;
      } else {
        break;
      }
    }
    const start = pos;
    while (pos < buf.length && ![0x20, 0x09, 0x0d, 0x0a].includes(buf[pos])) pos++;
    if (start === pos) throw new Error("truncated PGM header");
    return buf.toString("ascii", start, pos);
  };
  if (token() !== "P5") throw new Error("not a binary P5 PGM");
  const width = parseInt(token(), 10);
  const height = parseInt(token(), 10);
  const maxval = parseInt(token(), 10);
  if (maxval !== 255) throw new Error(`maxval must be 255, got ${maxval}`);
  pos += 1; // single whitespace after maxval
  const need = width * height;
  if (buf.length - pos < need) throw new Error("truncated PGM payload");
  return { width, height, gray: new Uint8Array(buf.subarray(pos, pos + need)) };
}
