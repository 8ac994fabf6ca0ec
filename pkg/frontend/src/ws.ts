import { Transport } from "./transport.js";

/** Browser transport: one WebSocket, one JSON message per frame. */
export function webSocketTransport(url: string): Transport {
  const ws = new WebSocket(url);
  const t: Transport = {
    send(line: string) {
      if (ws.readyState === WebSocket.OPEN) ws.send(line);
    },
    close() {
      ws.close();
    },
    onLine: null,
    onOpen: null,
    onClose: null,
  };
  ws.onopen = () => t.onOpen?.();
  ws.onclose = () => t.onClose?.();
  ws.onerror = () => ws.close();
  ws.onmessage = (ev) => {
    if (typeof ev.data === "string") {
      // the bridge sends one message per line, no trailing newline
      for (const line of ev.data.split("\n")) {
        if (line.length > 0) t.onLine?.(line);
      }
    }
  };
  return t;
}
