import * as net from "node:net";
import { LineSplitter, Transport } from "./transport.js";

/** Node transport: raw TCP with newline-delimited JSON. */
export function tcpTransport(host: string, port: number): Transport {
  const t: Transport = {
    send(line: string) {
      sock.write(line + "\n");
    },
    close() {
      sock.destroy();
    },
    onLine: null,
    onOpen: null,
    onClose: null,
  };
  const splitter = new LineSplitter((line) => t.onLine?.(line));
  const sock = net.createConnection({ host, port });
  sock.setEncoding("utf8");
  sock.on("connect", () => t.onOpen?.());
  sock.on("data", (chunk: string) => splitter.push(chunk));
  sock.on("error", () => sock.destroy());
  sock.on("close", () => t.onClose?.());
  return t;
}
