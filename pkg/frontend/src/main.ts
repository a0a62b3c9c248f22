import { App } from './app.js';

function required(id: string): HTMLElement {
  const element = document.getElementById(id);
  if (!element) throw new Error(`missing #${id} container`);
  return element;
}

const params = new URLSearchParams(window.location.search);
const config = {
  baseUrl: params.get('api') ?? 'http://127.0.0.1:8080',
  token: params.get('token') ?? undefined,
};

const app = new App(config, required('queue'), required('dashboards'), required('notice'));
void app.start();

// reviewers share the queue; poll so resolved rows disappear everywhere
setInterval(() => void app.refreshQueue(), 15000);
setInterval(() => void app.refreshDashboards(), 30000);
