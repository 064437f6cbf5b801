// HTTP client for the garden backend, including the resumable NDJSON event
// stream. On connection loss the stream reconnects from the last seq seen,
// so the store never misses or double-applies an event.

import type { GardenEvent, GardenView, NodeDetail, PatchResult } from './types.js';

export type StreamStatus = 'connecting' | 'open' | 'lost' | 'stopped';

export interface StreamHandle {
  stop(): void;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function expectJson<T>(response: Response): Promise<T> {
  const body = await response.text();
  if (!response.ok) {
    let message = body;
    try {
      message = (JSON.parse(body) as { error?: string }).error ?? body;
    } catch {
      // keep raw body
    }
    throw new ApiError(response.status, message);
  }
  return JSON.parse(body) as T;
}

export class ApiClient {
  constructor(readonly base: string) {}

  private url(path: string): string {
    return `${this.base}${path}`;
  }

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(this.url(path), {
      method,
      headers: body === undefined ? {} : { 'Content-Type': 'application/json' },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    return expectJson<T>(response);
  }

  createGarden(): Promise<{ garden_id: string }> {
    return this.call('POST', '/gardens');
  }

  seed(garden: string, text: string): Promise<{ node_id: number }> {
    return this.call('POST', `/gardens/${garden}/seed`, { text });
  }

  getGarden(garden: string): Promise<GardenView> {
    return this.call('GET', `/gardens/${garden}`);
  }

  getNode(garden: string, nodeId: number): Promise<NodeDetail> {
    return this.call('GET', `/gardens/${garden}/nodes/${nodeId}`);
  }

  step(garden: string): Promise<{ idle: boolean; unit: string | null }> {
    return this.call('POST', `/gardens/${garden}/step`);
  }

  setMode(garden: string, mode: 'play' | 'pause' | 'step'): Promise<{ mode: string }> {
    return this.call('POST', `/gardens/${garden}/mode`, { mode });
  }

  patchNode(
    garden: string,
    nodeId: number,
    patch: { is_leaf?: boolean; text?: string; feedback?: string },
  ): Promise<PatchResult> {
    return this.call('PATCH', `/gardens/${garden}/nodes/${nodeId}`, patch);
  }

  compileAndRun(garden: string, nodeId: number): Promise<{ session: string }> {
    return this.call('POST', `/gardens/${garden}/nodes/${nodeId}/compile-and-run`);
  }

  restore(garden: string, backupId: string): Promise<{ restored: number[] }> {
    return this.call('POST', `/gardens/${garden}/restore`, { backup_id: backupId });
  }

  /**
   * Follow the event stream from `fromSeq`, reconnecting on loss. The seq of
   * the last delivered event is the resume point.
   */
  streamEvents(
    garden: string,
    fromSeq: number,
    onEvent: (event: GardenEvent) => void,
    onStatus?: (status: StreamStatus) => void,
    reconnectDelayMs = 300,
  ): StreamHandle {
    let stopped = false;
    let cursor = fromSeq;
    let controller: AbortController | null = null;

    const connect = async (): Promise<void> => {
      while (!stopped) {
        onStatus?.('connecting');
        controller = new AbortController();
        try {
          const response = await fetch(
            this.url(`/gardens/${garden}/events?from=${cursor}`),
            { signal: controller.signal },
          );
          if (!response.ok || response.body === null) {
            throw new ApiError(response.status, 'stream rejected');
          }
          onStatus?.('open');
          const reader = response.body.getReader();
          const decoder = new TextDecoder();
          let buffer = '';
          for (;;) {
            const { value, done } = await reader.read();
            if (done) break;
            buffer += decoder.decode(value, { stream: true });
            let newline = buffer.indexOf('\n');
            while (newline >= 0) {
              const line = buffer.slice(0, newline).trim();
              buffer = buffer.slice(newline + 1);
              if (line.length > 0) {
                const event = JSON.parse(line) as GardenEvent;
                cursor = Math.max(cursor, event.seq);
                onEvent(event);
              }
              newline = buffer.indexOf('\n');
            }
          }
        } catch {
          // fall through to reconnect
        }
        if (stopped) break;
        onStatus?.('lost');
        await new Promise((resolve) => setTimeout(resolve, reconnectDelayMs));
      }
      onStatus?.('stopped');
    };

    void connect();
    return {
      stop() {
        stopped = true;
        controller?.abort();
      },
    };
  }
}
